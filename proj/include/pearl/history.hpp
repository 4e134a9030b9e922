#pragma once

#include <deque>
#include <memory>

#include "pearl/nn.hpp"
#include "pearl/transition.hpp"

namespace pearl {

using SubjectiveState = Vector;

// Converts the observation stream into the fixed-width subjective state that
// every other module consumes. Stateful, owned by one agent.
class HistorySummarizer {
 public:
  virtual ~HistorySummarizer() = default;

  virtual long state_dim() const = 0;
  virtual long observation_dim() const = 0;

  virtual void reset(const Vector& initial_observation) = 0;
  virtual SubjectiveState observe(const Vector& observation) = 0;
  virtual SubjectiveState current_state() const = 0;

  // Raw-observation window ending at the latest observation; stored in
  // transitions when the summarizer is learnable.
  virtual std::optional<ObservationWindow> window() const { return std::nullopt; }

  virtual bool learnable() const { return false; }
  virtual ParameterSet* parameters() { return nullptr; }

  // Differentiable batch re-summarization of stored windows. Only a
  // learnable summarizer implements this.
  virtual Var summarize_batch(Tape&, const Tape::Params&,
                              const std::vector<const ObservationWindow*>&) {
    throw UsageError("summarizer is not learnable");
  }
};

class IdentitySummarizer : public HistorySummarizer {
 public:
  explicit IdentitySummarizer(long observation_dim) : dim_(observation_dim) {}
  long state_dim() const override { return dim_; }
  long observation_dim() const override { return dim_; }
  void reset(const Vector& obs) override { state_ = check(obs); }
  SubjectiveState observe(const Vector& obs) override { return state_ = check(obs); }
  SubjectiveState current_state() const override { return state_; }

 private:
  Vector check(const Vector& obs) const {
    if (obs.size() != dim_) throw ContractError("observation width changed");
    return obs;
  }
  long dim_;
  Vector state_;
};

// Newest-first concatenation of the last L observations, zero-padded.
class StackingSummarizer : public HistorySummarizer {
 public:
  StackingSummarizer(long observation_dim, long history_length);
  long state_dim() const override { return obs_dim_ * length_; }
  long observation_dim() const override { return obs_dim_; }
  void reset(const Vector& obs) override;
  SubjectiveState observe(const Vector& obs) override;
  SubjectiveState current_state() const override;
  long history_length() const { return length_; }

 private:
  long obs_dim_;
  long length_;
  std::deque<Vector> ring_;  // newest at front
};

// Runs an LSTM over the observation stream; trained jointly with the policy
// learner by re-summarizing truncated windows stored in transitions.
class LstmSummarizer : public HistorySummarizer {
 public:
  LstmSummarizer(long observation_dim, long hidden_dim, long num_layers, long history_length,
                 unsigned long seed);
  long state_dim() const override { return spec_.hidden_dim; }
  long observation_dim() const override { return spec_.input_dim; }
  void reset(const Vector& obs) override;
  SubjectiveState observe(const Vector& obs) override;
  SubjectiveState current_state() const override;
  std::optional<ObservationWindow> window() const override;
  bool learnable() const override { return true; }
  ParameterSet* parameters() override { return &params_; }
  Var summarize_batch(Tape& tape, const Tape::Params& p,
                      const std::vector<const ObservationWindow*>& windows) override;
  const LstmSpec& spec() const { return spec_; }
  long history_length() const { return length_; }

 private:
  SubjectiveState step_online(const Vector& obs);

  LstmSpec spec_;
  long length_;
  ParameterSet params_;
  LstmState state_;
  Vector current_;
  std::deque<Vector> window_;  // newest last
};

}  // namespace pearl
