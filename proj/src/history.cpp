#include "pearl/history.hpp"

namespace pearl {

StackingSummarizer::StackingSummarizer(long observation_dim, long history_length)
    : obs_dim_(observation_dim), length_(history_length) {
  if (obs_dim_ < 1 || length_ < 1) throw ConfigError("stacking summarizer dims must be >= 1");
}

void StackingSummarizer::reset(const Vector& obs) {
  ring_.clear();
  observe(obs);
}

SubjectiveState StackingSummarizer::observe(const Vector& obs) {
  if (obs.size() != obs_dim_) throw ContractError("observation width changed");
  ring_.push_front(obs);
  while (static_cast<long>(ring_.size()) > length_) ring_.pop_back();
  return current_state();
}

SubjectiveState StackingSummarizer::current_state() const {
  Vector out = Vector::Zero(obs_dim_ * length_);
  long slot = 0;
  for (const auto& obs : ring_) out.segment((slot++) * obs_dim_, obs_dim_) = obs;
  return out;
}

LstmSummarizer::LstmSummarizer(long observation_dim, long hidden_dim, long num_layers,
                               long history_length, unsigned long seed)
    : spec_{observation_dim, hidden_dim, num_layers}, length_(history_length) {
  if (hidden_dim < 1 || num_layers < 1 || history_length < 1)
    throw ConfigError("lstm summarizer dims must be >= 1");
  Rng rng(seed);
  init_lstm(params_, "summarizer", spec_, rng);
  state_ = lstm_zero_state(spec_);
  current_ = Vector::Zero(hidden_dim);
}

void LstmSummarizer::reset(const Vector& obs) {
  state_ = lstm_zero_state(spec_);
  window_.clear();
  observe(obs);
}

SubjectiveState LstmSummarizer::observe(const Vector& obs) {
  if (obs.size() != spec_.input_dim) throw ContractError("observation width changed");
  window_.push_back(obs);
  while (static_cast<long>(window_.size()) > length_) window_.pop_front();
  return current_ = step_online(obs);
}

SubjectiveState LstmSummarizer::step_online(const Vector& obs) {
  Tape tape;
  auto p = tape.bind(params_);
  LstmVarState vs;
  for (long l = 0; l < spec_.num_layers; ++l) {
    vs.h.push_back(tape.constant(state_.h[l]));
    vs.c.push_back(tape.constant(state_.c[l]));
  }
  auto next = lstm_step(tape, p, "summarizer", spec_, vs, tape.constant(obs.transpose()));
  for (long l = 0; l < spec_.num_layers; ++l) {
    state_.h[l] = next.h[l].value();
    state_.c[l] = next.c[l].value();
  }
  return next.h.back().value().row(0).transpose();
}

SubjectiveState LstmSummarizer::current_state() const { return current_; }

std::optional<ObservationWindow> LstmSummarizer::window() const {
  ObservationWindow w;
  w.length = static_cast<long>(window_.size());
  w.observations = Tensor::Zero(length_, spec_.input_dim);
  for (long i = 0; i < w.length; ++i) w.observations.row(i) = window_[i].transpose();
  return w;
}

Var LstmSummarizer::summarize_batch(Tape& tape, const Tape::Params& p,
                                    const std::vector<const ObservationWindow*>& windows) {
  long batch = static_cast<long>(windows.size());
  if (batch == 0) throw UsageError("summarize_batch: empty batch");
  // Left-align windows so the newest observation is consumed last; shorter
  // windows are padded with leading zero steps driven from zero state, which
  // matches running the LSTM from reset on the shorter sequence only when
  // padding contributes nothing -- so shorter windows are unrolled from
  // their own first step using per-row validity masks.
  LstmVarState state;
  for (long l = 0; l < spec_.num_layers; ++l) {
    state.h.push_back(tape.constant(Tensor::Zero(batch, spec_.hidden_dim)));
    state.c.push_back(tape.constant(Tensor::Zero(batch, spec_.hidden_dim)));
  }
  for (long t = 0; t < length_; ++t) {
    Tensor inputs = Tensor::Zero(batch, spec_.input_dim);
    Tensor valid = Tensor::Zero(batch, spec_.hidden_dim);
    bool any = false;
    for (long r = 0; r < batch; ++r) {
      long len = windows[r]->length;
      long offset = length_ - len;  // row r starts stepping at t == offset
      if (t >= offset) {
        inputs.row(r) = windows[r]->observations.row(t - offset);
        valid.row(r).setOnes();
        any = true;
      }
    }
    if (!any) continue;
    auto next = lstm_step(tape, p, "summarizer", spec_, state, tape.constant(inputs));
    // Rows not yet active keep zero state.
    Var vmask = tape.constant(valid);
    for (long l = 0; l < spec_.num_layers; ++l) {
      state.h[l] = tape.mul(next.h[l], vmask);
      state.c[l] = tape.mul(next.c[l], vmask);
    }
  }
  return state.h.back();
}

}  // namespace pearl
