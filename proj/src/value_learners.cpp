#include "pearl/value_learners.hpp"

#include <cmath>
#include <limits>

#include "pearl/batch_util.hpp"
#include "pearl/losses.hpp"

namespace pearl {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::vector<std::uint8_t> mask_vector(const Tensor& mask_row) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(mask_row.cols()));
  for (long a = 0; a < mask_row.cols(); ++a) out[static_cast<std::size_t>(a)] = mask_row(0, a) != 0;
  return out;
}

double masked_row_max(const Tensor& q, long row, const Tensor& mask_row) {
  double best = kNegInf;
  for (long a = 0; a < q.cols(); ++a)
    if (mask_row(0, a) != 0) best = std::max(best, q(row, a));
  if (best == kNegInf) throw ContractError("no available next actions");
  return best;
}

long masked_row_argmax(const Tensor& q, long row, const Tensor& mask_row) {
  long best = -1;
  double best_v = kNegInf;
  for (long a = 0; a < q.cols(); ++a)
    if (mask_row(0, a) != 0 && (best < 0 || q(row, a) > best_v)) {
      best = a;
      best_v = q(row, a);
    }
  if (best < 0) throw ContractError("no available next actions");
  return best;
}





bool batch_has_windows(const std::vector<const Transition*>& batch) {
  for (const auto* t : batch)
    if (!t->state_window) return false;
  return true;
}

}  // namespace

Vector masked_q_values(const Vector& q, const Tensor& mask_row) {
  if (q.size() != mask_row.cols()) throw DimensionError("q/mask length mismatch");
  bool any = false;
  Vector out = q;
  for (long a = 0; a < q.size(); ++a) {
    if (mask_row(0, a) != 0)
      any = true;
    else
      out(a) = kNegInf;
  }
  if (!any) throw ContractError("all actions masked");
  return out;
}

Vector td_targets(TdVariant variant, const std::vector<const Transition*>& batch,
                  const Tensor& next_q_target, const Tensor& next_q_online, double gamma) {
  const long b = static_cast<long>(batch.size());
  Vector out(b);
  for (long i = 0; i < b; ++i) {
    const auto& t = *batch[static_cast<std::size_t>(i)];
    if (t.terminated) {
      out(i) = t.reward;
      continue;
    }
    double v = 0.0;
    switch (variant) {
      case TdVariant::Dqn:
        v = masked_row_max(next_q_target, i, t.next_mask);
        break;
      case TdVariant::Double:
        v = next_q_target(i, masked_row_argmax(next_q_online, i, t.next_mask));
        break;
      case TdVariant::Sarsa:
        if (t.next_action_index) {
          v = next_q_target(i, *t.next_action_index);
        } else if (t.truncated) {
          // Truncated tails have no stored next action; bootstrap greedily.
          v = masked_row_max(next_q_target, i, t.next_mask);
        } else {
          throw IncompatibleModulesError(
              "SARSA requires next actions recorded by an episodic buffer");
        }
        break;
    }
    out(i) = t.reward + gamma * v;
  }
  return out;
}

// ---------------------------------------------------------------------------
// QNetwork

QNetwork::QNetwork(long state_dim, long repr_dim, std::vector<long> hidden_dims, bool dueling,
                   long outputs_per_slot)
    : state_dim_(state_dim), repr_dim_(repr_dim), outputs_(outputs_per_slot), dueling_(dueling) {
  if (hidden_dims.empty()) throw ConfigError("q-network needs at least one hidden layer");
  if (dueling_ && outputs_ != 1) throw ConfigError("dueling supports scalar heads only");
  if (!dueling_) {
    main_spec_.input_dim = state_dim + repr_dim;
    main_spec_.hidden_dims = hidden_dims;
    main_spec_.output_dim = outputs_;
  } else {
    const long torso_out = hidden_dims.back();
    torso_spec_.input_dim = state_dim;
    torso_spec_.hidden_dims.assign(hidden_dims.begin(), hidden_dims.end() - 1);
    torso_spec_.output_dim = torso_out;
    torso_spec_.final_activation = Activation::Relu;
    value_spec_.input_dim = torso_out;
    value_spec_.hidden_dims = {};
    value_spec_.output_dim = 1;
    adv_spec_.input_dim = torso_out + repr_dim;
    adv_spec_.hidden_dims = {torso_out};
    adv_spec_.output_dim = 1;
  }
}

void QNetwork::init(ParameterSet& params, const std::string& prefix, Rng& rng) const {
  if (!dueling_) {
    init_mlp(params, prefix + ".main", main_spec_, rng);
  } else {
    init_mlp(params, prefix + ".torso", torso_spec_, rng);
    init_mlp(params, prefix + ".value", value_spec_, rng);
    init_mlp(params, prefix + ".adv", adv_spec_, rng);
  }
}

Var QNetwork::forward(Tape& tape, const Tape::Params& p, const std::string& prefix, Var states,
                      const std::function<Tensor(long)>& slot_reprs, long num_slots,
                      const Tensor& mask) const {
  if (!dueling_) {
    Var out;
    for (long a = 0; a < num_slots; ++a) {
      Var input = tape.concat_cols(states, tape.constant(slot_reprs(a)));
      Var o = forward_mlp(tape, p, prefix + ".main", main_spec_, input);
      out = a == 0 ? o : tape.concat_cols(out, o);
    }
    return out;
  }
  Var torso = forward_mlp(tape, p, prefix + ".torso", torso_spec_, states);
  Var value = forward_mlp(tape, p, prefix + ".value", value_spec_, torso);
  Var advs;
  for (long a = 0; a < num_slots; ++a) {
    Var input = tape.concat_cols(torso, tape.constant(slot_reprs(a)));
    Var adv = forward_mlp(tape, p, prefix + ".adv", adv_spec_, input);
    advs = a == 0 ? adv : tape.concat_cols(advs, adv);
  }
  return dueling_combine(tape, value, advs, mask);
}

Var QNetwork::forward_single(Tape& tape, const Tape::Params& p, const std::string& prefix,
                             Var input) const {
  if (dueling_) throw UsageError("forward_single is undefined for dueling networks");
  return forward_mlp(tape, p, prefix + ".main", main_spec_, input);
}

Tensor QNetwork::eval_slots(const ParameterSet& params, const std::string& prefix,
                            const Vector& state, const Tensor& action_reprs,
                            const Tensor& mask_row) const {
  Tape tape;
  auto p = tape.bind(params);
  Var states = tape.constant(Tensor(state.transpose()));
  const long num_slots = action_reprs.rows();
  auto slot_reprs = [&action_reprs](long a) { return Tensor(action_reprs.row(a)); };
  Var out = forward(tape, p, prefix, states, slot_reprs, num_slots, mask_row);
  // 1 x (A*outputs), slot-major -> A x outputs.
  Tensor result(num_slots, outputs_);
  for (long a = 0; a < num_slots; ++a)
    for (long j = 0; j < outputs_; ++j) result(a, j) = out.value()(0, a * outputs_ + j);
  return result;
}

// ---------------------------------------------------------------------------
// DeepQLearner

DeepQLearner::DeepQLearner(QLearnerConfig config, ExplorationConfig exploration,
                           unsigned long seed)
    : config_(config),
      net_(config.state_dim, config.action_repr_dim, config.hidden_dims,
           config.variant == QVariant::DuelingDqn),
      optimizer_(OptimizerConfig{OptimizerKind::AdamW, config.lr}),
      exploration_(exploration) {
  if (config_.gamma < 0 || config_.gamma > 1) throw ConfigError("gamma must be in [0,1]");
  if (config_.target_step_size <= 0 || config_.target_step_size > 1)
    throw ConfigError("target step size must be in (0,1]");
  Rng rng(seed);
  net_.init(params_, "q", rng);
  target_params_ = params_;
}

long DeepQLearner::act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                                const Tensor& mask_row, bool exploit, Rng& rng) {
  Tensor q = net_.eval_slots(params_, "q", state, action_reprs, mask_row);
  Vector means = q.col(0);
  auto mask = mask_vector(mask_row);
  if (exploit) return masked_argmax(means, mask);
  ScoringContext ctx;
  ctx.means = means;
  ctx.mask = mask;
  return exploration_.explore_discrete(ctx, rng);
}

Tensor DeepQLearner::batch_q(const ParameterSet& params, const std::vector<const Transition*>& batch,
                             bool next) const {
  Tape tape;
  auto p = tape.bind(params);
  Var states = tape.constant(stack_states(batch, next));
  const long num_slots = (next ? batch[0]->next_available_actions : batch[0]->curr_available_actions).rows();
  Var out = net_.forward(tape, p, "q", states, batch_slot_reprs(batch, next), num_slots,
                         stack_masks(batch, next));
  return out.value();
}

double DeepQLearner::step_batch(const std::vector<const Transition*>& batch) {
  if (batch.empty()) throw UsageError("empty batch");
  const Tensor next_q_target = batch_q(target_params_, batch, true);
  Tensor next_q_online;
  if (config_.variant == QVariant::DoubleDqn) next_q_online = batch_q(params_, batch, true);
  TdVariant variant = config_.variant == QVariant::DoubleDqn ? TdVariant::Double
                      : config_.variant == QVariant::Sarsa  ? TdVariant::Sarsa
                                                            : TdVariant::Dqn;
  const Vector targets = td_targets(variant, batch, next_q_target, next_q_online, config_.gamma);

  Tape tape;
  auto p = tape.bind(params_);
  Var states;
  bool through_summarizer =
      summarizer_ && summarizer_->learnable() && batch_has_windows(batch);
  Tape::Params sp;
  if (through_summarizer) {
    sp = tape.bind(*summarizer_->parameters());
    std::vector<const ObservationWindow*> windows;
    windows.reserve(batch.size());
    for (const auto* t : batch) windows.push_back(&*t->state_window);
    states = summarizer_->summarize_batch(tape, sp, windows);
  } else {
    states = tape.constant(stack_states(batch, false));
  }

  Var pred;
  if (net_.dueling()) {
    const long num_slots = batch[0]->curr_available_actions.rows();
    Var q_all = net_.forward(tape, p, "q", states, batch_slot_reprs(batch, false), num_slots,
                             stack_masks(batch, false));
    Tensor onehot = Tensor::Zero(static_cast<long>(batch.size()), num_slots);
    for (long i = 0; i < onehot.rows(); ++i)
      onehot(i, batch[static_cast<std::size_t>(i)]->action_index) = 1.0;
    pred = tape.row_sum(tape.mul(q_all, tape.constant(onehot)));
  } else {
    Var input = tape.concat_cols(states, tape.constant(stack_taken_reprs(batch)));
    pred = net_.forward_single(tape, p, "q", input);
  }

  Var err = tape.sub(pred, tape.constant(Tensor(targets)));
  Var loss = config_.huber ? tape.mean(tape.huber(err, 1.0)) : tape.mean(tape.square(err));
  const double loss_value = loss.value()(0, 0);
  if (!std::isfinite(loss_value)) throw TrainingError("non-finite q loss");
  tape.backward(loss);
  optimizer_.step(params_, tape.gradients(params_, p));
  if (through_summarizer) {
    if (!summarizer_opt_)
      summarizer_opt_ =
          std::make_unique<Optimizer>(OptimizerConfig{OptimizerKind::AdamW, config_.lr});
    summarizer_opt_->step(*summarizer_->parameters(),
                          tape.gradients(*summarizer_->parameters(), sp));
  }
  ++update_count_;
  if (update_count_ % config_.target_update_period == 0)
    soft_update(target_params_, params_, config_.target_step_size);
  return loss_value;
}

LossReport DeepQLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (config_.variant == QVariant::Sarsa) {
    if (buffer.kind() != BufferKind::Episodic)
      throw IncompatibleModulesError("SARSA requires an episodic replay buffer");
    auto episodes = buffer.completed_episodes();
    if (episodes.empty()) return report;
    double loss = 0.0;
    for (const auto& episode : episodes) {
      loss = step_batch(episode);
      ++report.updates;
    }
    buffer.clear();
    report.values["q_loss"] = loss;
    return report;
  }
  if (static_cast<std::size_t>(config_.batch_size) > buffer.capacity())
    throw ConfigError("batch size exceeds replay buffer capacity");
  if (buffer.size() < static_cast<std::size_t>(config_.batch_size)) return report;
  double loss = 0.0;
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.batch_size), rng);
    loss = step_batch(batch);
    ++report.updates;
  }
  report.values["q_loss"] = loss;
  return report;
}

// ---------------------------------------------------------------------------
// BootstrappedQLearner

BootstrappedQLearner::BootstrappedQLearner(QLearnerConfig config, long ensemble_size,
                                           double mask_probability, unsigned long seed)
    : config_(config),
      ensemble_k_(ensemble_size),
      mask_p_(mask_probability),
      net_(config.state_dim, config.action_repr_dim, config.hidden_dims, false),
      optimizer_(OptimizerConfig{OptimizerKind::AdamW, config.lr}),
      exploration_([&] {
        ExplorationConfig e;
        e.kind = ExplorationKind::DeepExploration;
        e.ensemble_size = ensemble_size;
        return e;
      }()) {
  if (ensemble_k_ < 1) throw ConfigError("ensemble size must be >= 1");
  if (mask_p_ <= 0 || mask_p_ > 1) throw ConfigError("bootstrap mask probability in (0,1]");
  Rng rng(seed);
  for (long k = 0; k < ensemble_k_; ++k) net_.init(params_, prefix(k), rng);
  target_params_ = params_;
}

long BootstrappedQLearner::act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                                        const Tensor& mask_row, bool exploit, Rng& rng) {
  const long k = exploration_.episode_index();
  Tensor q = net_.eval_slots(params_, prefix(k), state, action_reprs, mask_row);
  Vector means = q.col(0);
  auto mask = mask_vector(mask_row);
  if (exploit) {
    // Exploit aggregates the ensemble: greedy on the mean over members.
    Vector agg = Vector::Zero(means.size());
    for (long m = 0; m < ensemble_k_; ++m)
      agg += net_.eval_slots(params_, prefix(m), state, action_reprs, mask_row).col(0);
    return masked_argmax(agg, mask);
  }
  ScoringContext ctx;
  ctx.means = means;
  ctx.mask = mask;
  return exploration_.explore_discrete(ctx, rng);
}

LossReport BootstrappedQLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (buffer.size() < static_cast<std::size_t>(config_.batch_size)) return report;
  double loss_acc = 0.0;
  long loss_n = 0;
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.batch_size), rng);
    for (long k = 0; k < ensemble_k_; ++k) {
      std::vector<const Transition*> member_batch;
      for (const auto* t : batch)
        if (static_cast<long>(t->bootstrap_mask.size()) > k && t->bootstrap_mask[k])
          member_batch.push_back(t);
      if (member_batch.empty()) continue;

      Tape eval_tape;
      auto tp = eval_tape.bind(target_params_);
      Var next_states = eval_tape.constant(stack_states(member_batch, true));
      const long num_slots = member_batch[0]->next_available_actions.rows();
      Tensor next_q = net_
                          .forward(eval_tape, tp, prefix(k), next_states,
                                   batch_slot_reprs(member_batch, true), num_slots,
                                   stack_masks(member_batch, true))
                          .value();
      Vector targets = td_targets(TdVariant::Dqn, member_batch, next_q, Tensor(), config_.gamma);

      Tape tape;
      auto p = tape.bind(params_);
      Var states = tape.constant(stack_states(member_batch, false));
      Var input = tape.concat_cols(states, tape.constant(stack_taken_reprs(member_batch)));
      Var pred = net_.forward_single(tape, p, prefix(k), input);
      Var loss = tape.mean(tape.square(tape.sub(pred, tape.constant(Tensor(targets)))));
      const double lv = loss.value()(0, 0);
      if (!std::isfinite(lv)) throw TrainingError("non-finite ensemble loss");
      tape.backward(loss);
      optimizer_.step(params_, tape.gradients(params_, p));
      loss_acc += lv;
      ++loss_n;
      ++report.updates;
    }
    ++update_count_;
    if (update_count_ % config_.target_update_period == 0)
      soft_update(target_params_, params_, config_.target_step_size);
  }
  if (loss_n > 0) report.values["q_loss"] = loss_acc / loss_n;
  return report;
}

// ---------------------------------------------------------------------------
// QuantileQLearner

QuantileQLearner::QuantileQLearner(QrdqnConfig config, ExplorationConfig exploration,
                                   unsigned long seed)
    : config_(config),
      net_(config.base.state_dim, config.base.action_repr_dim, config.base.hidden_dims, false,
           config.num_quantiles),
      optimizer_(OptimizerConfig{OptimizerKind::AdamW, config.base.lr}),
      exploration_(exploration) {
  if (config_.num_quantiles < 1) throw ConfigError("need >= 1 quantile");
  Rng rng(seed);
  net_.init(params_, "q", rng);
  target_params_ = params_;
}

double QuantileQLearner::risk_beta() const {
  return safety_ && safety_->kind == SafetyKind::MeanVariance ? safety_->beta : 0.0;
}

Vector QuantileQLearner::risk_q(const Tensor& quantile_matrix, const Tensor& mask_row) const {
  ReturnDistribution dist{quantile_matrix};
  Vector q = mean_variance_q(dist, risk_beta());
  for (long a = 0; a < q.size(); ++a)
    if (mask_row(0, a) == 0) q(a) = kNegInf;
  return q;
}

Tensor QuantileQLearner::quantiles(const Vector& state, const Tensor& action_reprs,
                                   const Tensor& mask_row) const {
  return net_.eval_slots(params_, "q", state, action_reprs, mask_row);
}

long QuantileQLearner::act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                                    const Tensor& mask_row, bool exploit, Rng& rng) {
  Tensor theta = quantiles(state, action_reprs, mask_row);
  Vector q = risk_q(theta, mask_row);
  auto mask = mask_vector(mask_row);
  if (exploit) return masked_argmax(q, mask);
  ScoringContext ctx;
  ctx.means = q;
  ctx.mask = mask;
  return exploration_.explore_discrete(ctx, rng);
}

double QuantileQLearner::step_batch(const std::vector<const Transition*>& batch) {
  if (batch.empty()) throw UsageError("empty batch");
  const long b = static_cast<long>(batch.size());
  const long n = config_.num_quantiles;

  // Target-net quantiles of every next-state slot.
  Tape eval_tape;
  auto tp = eval_tape.bind(target_params_);
  Var next_states = eval_tape.constant(stack_states(batch, true));
  const long num_slots = batch[0]->next_available_actions.rows();
  Tensor next_theta = net_
                          .forward(eval_tape, tp, "q", next_states, batch_slot_reprs(batch, true),
                                   num_slots, stack_masks(batch, true))
                          .value();  // b x (A*n)

  Tensor targets(b, n);
  for (long i = 0; i < b; ++i) {
    const auto& t = *batch[static_cast<std::size_t>(i)];
    if (t.terminated) {
      targets.row(i).setConstant(t.reward);
      continue;
    }
    Tensor per_action(num_slots, n);
    for (long a = 0; a < num_slots; ++a)
      for (long j = 0; j < n; ++j) per_action(a, j) = next_theta(i, a * n + j);
    Vector q = risk_q(per_action, t.next_mask);
    long greedy = 0;
    for (long a = 1; a < num_slots; ++a)
      if (q(a) > q(greedy)) greedy = a;
    targets.row(i) = t.reward + config_.base.gamma * per_action.row(greedy).array();
  }

  Tape tape;
  auto p = tape.bind(params_);
  Var states = tape.constant(stack_states(batch, false));
  Var input = tape.concat_cols(states, tape.constant(stack_taken_reprs(batch)));
  Var pred = net_.forward_single(tape, p, "q", input);  // b x n
  Var loss = quantile_huber_loss(tape, pred, targets, config_.kappa);
  const double lv = loss.value()(0, 0);
  if (!std::isfinite(lv)) throw TrainingError("non-finite quantile loss");
  tape.backward(loss);
  optimizer_.step(params_, tape.gradients(params_, p));
  ++update_count_;
  if (update_count_ % config_.base.target_update_period == 0)
    soft_update(target_params_, params_, config_.base.target_step_size);
  return lv;
}

LossReport QuantileQLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (buffer.size() < static_cast<std::size_t>(config_.base.batch_size)) return report;
  double loss = 0.0;
  for (long r = 0; r < config_.base.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.base.batch_size), rng);
    loss = step_batch(batch);
    ++report.updates;
  }
  report.values["quantile_loss"] = loss;
  return report;
}

}  // namespace pearl
