#include "pearl/actor_critic.hpp"

#include <cmath>

#include "pearl/batch_util.hpp"

namespace pearl {
namespace {

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 * log(2*pi)

std::vector<std::uint8_t> mask_vector(const Tensor& mask_row) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(mask_row.cols()));
  for (long a = 0; a < mask_row.cols(); ++a) out[static_cast<std::size_t>(a)] = mask_row(0, a) != 0;
  return out;
}

long sample_index(const Vector& probs, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  long last = -1;
  for (long a = 0; a < probs.size(); ++a) {
    if (probs(a) <= 0.0) continue;
    acc += probs(a);
    last = a;
    if (u < acc) return a;
  }
  if (last < 0) throw ContractError("no available actions");
  return last;
}

// b x 1 -> b x n broadcast.
Var broadcast_col(Tape& tape, Var col, long n) {
  return tape.matmul(col, tape.constant(Tensor::Ones(1, n)));
}

GradientMap filter_prefix(const GradientMap& grads, const std::string& prefix) {
  GradientMap out;
  for (const auto& [name, g] : grads)
    if (name.rfind(prefix, 0) == 0) out[name] = g;
  return out;
}

Tensor gaussian_tensor(long rows, long cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor out(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) out(i, j) = normal(rng);
  return out;
}

}  // namespace

Vector dynamic_actor_probs(const Vector& logits, const Tensor& mask_row) {
  if (logits.size() != mask_row.cols()) throw DimensionError("logits/mask length mismatch");
  double max_logit = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (long a = 0; a < logits.size(); ++a)
    if (mask_row(0, a) != 0) {
      any = true;
      max_logit = std::max(max_logit, logits(a));
    }
  if (!any) throw ContractError("all actions masked");
  Vector probs = Vector::Zero(logits.size());
  double z = 0.0;
  for (long a = 0; a < logits.size(); ++a)
    if (mask_row(0, a) != 0) {
      probs(a) = std::exp(logits(a) - max_logit);
      z += probs(a);
    }
  probs /= z;
  return probs;
}

double dynamic_critic_expectation(const Vector& q, const Vector& probs, const Tensor& mask_row) {
  if (q.size() != probs.size() || q.size() != mask_row.cols())
    throw DimensionError("q/probs/mask length mismatch");
  double out = 0.0;
  for (long a = 0; a < q.size(); ++a)
    if (mask_row(0, a) != 0) out += probs(a) * q(a);
  return out;
}

Vector suffix_returns(const std::vector<const Transition*>& episode, double gamma) {
  const long n = static_cast<long>(episode.size());
  Vector g(n);
  double acc = 0.0;
  for (long t = n - 1; t >= 0; --t) {
    acc = episode[static_cast<std::size_t>(t)]->reward + gamma * acc;
    g(t) = acc;
  }
  return g;
}

// ---------------------------------------------------------------------------
// DynamicActor

DynamicActor::DynamicActor(long state_dim, long repr_dim, std::vector<long> hidden_dims) {
  spec_.input_dim = state_dim + repr_dim;
  spec_.hidden_dims = std::move(hidden_dims);
  spec_.output_dim = 1;
}

void DynamicActor::init(ParameterSet& params, const std::string& prefix, Rng& rng) const {
  init_mlp(params, prefix, spec_, rng);
}

Var DynamicActor::logits(Tape& tape, const Tape::Params& p, const std::string& prefix, Var states,
                         const std::function<Tensor(long)>& slot_reprs, long num_slots) const {
  Var out;
  for (long a = 0; a < num_slots; ++a) {
    Var input = tape.concat_cols(states, tape.constant(slot_reprs(a)));
    Var logit = forward_mlp(tape, p, prefix, spec_, input);
    out = a == 0 ? logit : tape.concat_cols(out, logit);
  }
  return out;
}

Vector DynamicActor::eval_logits(const ParameterSet& params, const std::string& prefix,
                                 const Vector& state, const Tensor& action_reprs) const {
  Tape tape;
  auto p = tape.bind(params);
  Var states = tape.constant(Tensor(state.transpose()));
  auto slot = [&action_reprs](long a) { return Tensor(action_reprs.row(a)); };
  Var out = logits(tape, p, prefix, states, slot, action_reprs.rows());
  return out.value().row(0).transpose();
}

// ---------------------------------------------------------------------------
// ReinforceLearner

ReinforceLearner::ReinforceLearner(AcConfig config, ExplorationConfig exploration,
                                   unsigned long seed)
    : config_(config),
      actor_(config.state_dim, config.action_repr_dim, config.hidden_dims),
      actor_opt_(OptimizerConfig{OptimizerKind::AdamW, config.actor_lr}),
      exploration_(exploration) {
  Rng rng(seed);
  actor_.init(params_, "actor", rng);
}

Vector ReinforceLearner::policy_probs(const Vector& state, const Tensor& action_reprs,
                                      const Tensor& mask_row) const {
  return dynamic_actor_probs(actor_.eval_logits(params_, "actor", state, action_reprs), mask_row);
}

long ReinforceLearner::act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                                    const Tensor& mask_row, bool exploit, Rng& rng) {
  Vector probs = policy_probs(state, action_reprs, mask_row);
  long chosen;
  if (exploit) {
    chosen = masked_argmax(probs, mask_vector(mask_row));
  } else {
    ScoringContext ctx;
    ctx.means = probs;
    ctx.distribution = probs;
    ctx.mask = mask_vector(mask_row);
    chosen = exploration_.explore_discrete(ctx, rng);
  }
  last_log_prob_ = std::log(std::max(probs(chosen), 1e-300));
  return chosen;
}

double ReinforceLearner::step_episode(const std::vector<const Transition*>& episode) {
  if (episode.empty()) throw UsageError("empty episode");
  const Vector g = suffix_returns(episode, config_.gamma);
  const long num_slots = episode[0]->curr_available_actions.rows();

  Tape tape;
  auto p = tape.bind(params_);
  Var states = tape.constant(stack_states(episode, false));
  Var logits = actor_.logits(tape, p, "actor", states, batch_slot_reprs(episode, false), num_slots);
  Var lse = tape.masked_logsumexp(logits, stack_masks(episode, false));
  Var taken_logit = tape.row_sum(tape.mul(logits, tape.constant(taken_onehot(episode, num_slots))));
  Var log_prob = tape.sub(taken_logit, lse);
  Var loss = tape.neg(tape.sum(tape.mul(log_prob, tape.constant(Tensor(g)))));
  const double lv = loss.value()(0, 0);
  if (!std::isfinite(lv)) throw TrainingError("non-finite policy-gradient loss");
  tape.backward(loss);
  actor_opt_.step(params_, tape.gradients(params_, p));
  return lv;
}

LossReport ReinforceLearner::learn(ReplayBuffer& buffer, Rng& /*rng*/) {
  LossReport report;
  if (buffer.kind() != BufferKind::Episodic)
    throw IncompatibleModulesError("REINFORCE requires an episodic replay buffer");
  auto episodes = buffer.completed_episodes();
  if (episodes.empty()) return report;
  double loss = 0.0;
  for (const auto& episode : episodes) {
    loss = step_episode(episode);
    ++report.updates;
  }
  buffer.clear();
  report.values["actor_loss"] = loss;
  return report;
}

// ---------------------------------------------------------------------------
// PpoLearner

PpoLearner::PpoLearner(AcConfig config, ExplorationConfig exploration, unsigned long seed)
    : config_(config),
      actor_(config.state_dim, config.action_repr_dim, config.hidden_dims),
      actor_opt_(OptimizerConfig{OptimizerKind::AdamW, config.actor_lr}),
      critic_opt_(OptimizerConfig{OptimizerKind::AdamW, config.critic_lr}),
      exploration_(exploration) {
  if (!(config.clip_low < 1.0 && 1.0 < config.clip_high))
    throw ConfigError("PPO clip bounds must straddle 1");
  value_spec_.input_dim = config.state_dim;
  value_spec_.hidden_dims = config.hidden_dims;
  value_spec_.output_dim = 1;
  Rng rng(seed);
  actor_.init(params_, "actor", rng);
  init_mlp(params_, "critic", value_spec_, rng);
}

Vector PpoLearner::policy_probs(const Vector& state, const Tensor& action_reprs,
                                const Tensor& mask_row) const {
  return dynamic_actor_probs(actor_.eval_logits(params_, "actor", state, action_reprs), mask_row);
}

double PpoLearner::value(const Vector& state) const {
  return eval_mlp(params_, "critic", value_spec_, state.transpose())(0, 0);
}

long PpoLearner::act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                              const Tensor& mask_row, bool exploit, Rng& rng) {
  Vector probs = policy_probs(state, action_reprs, mask_row);
  long chosen;
  if (exploit) {
    chosen = masked_argmax(probs, mask_vector(mask_row));
  } else {
    ScoringContext ctx;
    ctx.means = probs;
    ctx.distribution = probs;
    ctx.mask = mask_vector(mask_row);
    chosen = exploration_.explore_discrete(ctx, rng);
  }
  last_log_prob_ = std::log(std::max(probs(chosen), 1e-300));
  return chosen;
}

std::pair<double, double> PpoLearner::step_batch(const std::vector<const Transition*>& batch,
                                                 const Vector& returns) {
  const long b = static_cast<long>(batch.size());
  for (const auto* t : batch)
    if (!t->log_prob)
      throw IncompatibleModulesError("PPO requires behavior log-probs stored at act time");

  // Advantages against the current value baseline, before the critic step.
  Tensor states = stack_states(batch, false);
  Tensor v = eval_mlp(params_, "critic", value_spec_, states);
  Vector adv(b);
  for (long i = 0; i < b; ++i) adv(i) = returns(i) - v(i, 0);

  // Critic: MSE to suffix returns.
  double critic_loss;
  {
    Tape tape;
    auto p = tape.bind(params_);
    Var pred = forward_mlp(tape, p, "critic", value_spec_, tape.constant(states));
    Var loss = tape.mean(tape.square(tape.sub(pred, tape.constant(Tensor(returns)))));
    critic_loss = loss.value()(0, 0);
    tape.backward(loss);
    critic_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "critic"));
  }

  // Actor: clipped surrogate.
  double actor_loss;
  {
    const long num_slots = batch[0]->curr_available_actions.rows();
    Vector old_lp(b);
    for (long i = 0; i < b; ++i) old_lp(i) = *batch[static_cast<std::size_t>(i)]->log_prob;
    Tape tape;
    auto p = tape.bind(params_);
    Var logits =
        actor_.logits(tape, p, "actor", tape.constant(states), batch_slot_reprs(batch, false),
                      num_slots);
    Var lse = tape.masked_logsumexp(logits, stack_masks(batch, false));
    Var taken = tape.row_sum(tape.mul(logits, tape.constant(taken_onehot(batch, num_slots))));
    Var new_lp = tape.sub(taken, lse);
    Var ratio = tape.exp(tape.sub(new_lp, tape.constant(Tensor(old_lp))));
    Var adv_c = tape.constant(Tensor(adv));
    Var unclipped = tape.mul(ratio, adv_c);
    Var clipped = tape.mul(tape.clamp(ratio, config_.clip_low, config_.clip_high), adv_c);
    Var objective = tape.min(unclipped, clipped);
    Var loss = tape.neg(tape.mean(objective));
    actor_loss = loss.value()(0, 0);
    if (!std::isfinite(actor_loss)) throw TrainingError("non-finite PPO loss");
    tape.backward(loss);
    actor_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "actor"));
  }
  return {actor_loss, critic_loss};
}

LossReport PpoLearner::learn(ReplayBuffer& buffer, Rng& /*rng*/) {
  LossReport report;
  if (buffer.kind() != BufferKind::Episodic)
    throw IncompatibleModulesError("PPO requires an episodic replay buffer");
  auto episodes = buffer.completed_episodes();
  if (episodes.empty()) return report;

  std::vector<const Transition*> batch;
  std::vector<double> returns;
  for (const auto& episode : episodes) {
    Vector g = suffix_returns(episode, config_.gamma);
    for (std::size_t i = 0; i < episode.size(); ++i) {
      batch.push_back(episode[i]);
      returns.push_back(g(static_cast<long>(i)));
    }
  }
  Vector g(static_cast<long>(returns.size()));
  for (long i = 0; i < g.size(); ++i) g(i) = returns[static_cast<std::size_t>(i)];

  double actor_loss = 0.0, critic_loss = 0.0;
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto [al, cl] = step_batch(batch, g);
    actor_loss = al;
    critic_loss = cl;
    ++report.updates;
  }
  buffer.clear();
  report.values["actor_loss"] = actor_loss;
  report.values["critic_loss"] = critic_loss;
  return report;
}

// ---------------------------------------------------------------------------
// DiscreteSacLearner

DiscreteSacLearner::DiscreteSacLearner(AcConfig config, ExplorationConfig exploration,
                                       unsigned long seed)
    : config_(config),
      actor_(config.state_dim, config.action_repr_dim, config.hidden_dims),
      critic_(config.state_dim, config.action_repr_dim, config.hidden_dims, false),
      actor_opt_(OptimizerConfig{OptimizerKind::AdamW, config.actor_lr}),
      critic_opt_(OptimizerConfig{OptimizerKind::AdamW, config.critic_lr}),
      exploration_(exploration) {
  Rng rng(seed);
  actor_.init(params_, "actor", rng);
  critic_.init(params_, "q1", rng);
  critic_.init(params_, "q2", rng);
  target_params_ = params_;
}

Vector DiscreteSacLearner::policy_probs(const Vector& state, const Tensor& action_reprs,
                                        const Tensor& mask_row) const {
  return dynamic_actor_probs(actor_.eval_logits(params_, "actor", state, action_reprs), mask_row);
}

Vector DiscreteSacLearner::min_q(const Vector& state, const Tensor& action_reprs,
                                 const Tensor& mask_row) const {
  Vector q1 = critic_.eval_slots(params_, "q1", state, action_reprs, mask_row).col(0);
  Vector q2 = critic_.eval_slots(params_, "q2", state, action_reprs, mask_row).col(0);
  return q1.cwiseMin(q2);
}

long DiscreteSacLearner::act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                                      const Tensor& mask_row, bool exploit, Rng& rng) {
  Vector probs = policy_probs(state, action_reprs, mask_row);
  if (exploit) return masked_argmax(probs, mask_vector(mask_row));
  if (exploration_.kind() == ExplorationKind::Propensity) {
    ScoringContext ctx;
    ctx.means = probs;
    ctx.distribution = probs;
    ctx.mask = mask_vector(mask_row);
    return exploration_.explore_discrete(ctx, rng);
  }
  return sample_index(probs, rng);
}

std::pair<double, double> DiscreteSacLearner::step_batch(
    const std::vector<const Transition*>& batch) {
  const long b = static_cast<long>(batch.size());
  const long num_slots = batch[0]->curr_available_actions.rows();
  const double alpha = config_.entropy_coef;

  // Targets (plain evaluation, no gradients).
  Vector targets(b);
  {
    Tape tape;
    auto po = tape.bind(params_);
    auto pt = tape.bind(target_params_);
    Var next_states = tape.constant(stack_states(batch, true));
    Tensor next_masks = stack_masks(batch, true);
    Tensor logits = actor_
                        .logits(tape, po, "actor", next_states, batch_slot_reprs(batch, true),
                                num_slots)
                        .value();
    Tensor q1 = critic_
                    .forward(tape, pt, "q1", next_states, batch_slot_reprs(batch, true),
                             num_slots, next_masks)
                    .value();
    Tensor q2 = critic_
                    .forward(tape, pt, "q2", next_states, batch_slot_reprs(batch, true),
                             num_slots, next_masks)
                    .value();
    for (long i = 0; i < b; ++i) {
      const auto& t = *batch[static_cast<std::size_t>(i)];
      if (t.terminated) {
        targets(i) = t.reward;
        continue;
      }
      Vector probs = dynamic_actor_probs(logits.row(i).transpose(), t.next_mask);
      double v = 0.0;
      for (long a = 0; a < num_slots; ++a) {
        if (t.next_mask(0, a) == 0 || probs(a) <= 0.0) continue;
        const double min_q_a = std::min(q1(i, a), q2(i, a));
        v += probs(a) * (min_q_a - alpha * std::log(probs(a)));
      }
      targets(i) = t.reward + config_.gamma * v;
    }
  }

  // Critic step: both critics regress Q(s, a_taken) to the soft target.
  double critic_loss;
  {
    Tape tape;
    auto p = tape.bind(params_);
    Var states = tape.constant(stack_states(batch, false));
    Var input = tape.concat_cols(states, tape.constant(stack_taken_reprs(batch)));
    Var pred1 = critic_.forward_single(tape, p, "q1", input);
    Var pred2 = critic_.forward_single(tape, p, "q2", input);
    Var tgt = tape.constant(Tensor(targets));
    Var loss = tape.add(tape.mean(tape.square(tape.sub(pred1, tgt))),
                        tape.mean(tape.square(tape.sub(pred2, tgt))));
    critic_loss = loss.value()(0, 0);
    if (!std::isfinite(critic_loss)) throw TrainingError("non-finite SAC critic loss");
    tape.backward(loss);
    critic_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "q"));
  }

  // Actor step: exact expectation of alpha*log pi - minQ under pi.
  double actor_loss;
  {
    Tensor curr_masks = stack_masks(batch, false);
    // minQ as constants (gradient flows into the actor only).
    Tape eval_tape;
    auto pe = eval_tape.bind(params_);
    Var s_const = eval_tape.constant(stack_states(batch, false));
    Tensor q1 = critic_
                    .forward(eval_tape, pe, "q1", s_const, batch_slot_reprs(batch, false),
                             num_slots, curr_masks)
                    .value();
    Tensor q2 = critic_
                    .forward(eval_tape, pe, "q2", s_const, batch_slot_reprs(batch, false),
                             num_slots, curr_masks)
                    .value();
    Tensor minq = q1.cwiseMin(q2).cwiseProduct(curr_masks);  // masked slots -> 0

    Tape tape;
    auto p = tape.bind(params_);
    Var states = tape.constant(stack_states(batch, false));
    Var logits =
        actor_.logits(tape, p, "actor", states, batch_slot_reprs(batch, false), num_slots);
    Var probs = tape.masked_softmax(logits, curr_masks);
    Var lse = tape.masked_logsumexp(logits, curr_masks);
    Var log_probs = tape.sub(logits, broadcast_col(tape, lse, num_slots));
    Var term = tape.mul(probs, tape.sub(tape.scale(log_probs, alpha), tape.constant(minq)));
    Var loss = tape.mean(tape.row_sum(term));
    actor_loss = loss.value()(0, 0);
    if (!std::isfinite(actor_loss)) throw TrainingError("non-finite SAC actor loss");
    tape.backward(loss);
    actor_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "actor"));
  }

  soft_update(target_params_, params_, config_.tau);
  return {actor_loss, critic_loss};
}

LossReport DiscreteSacLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (buffer.size() < static_cast<std::size_t>(config_.batch_size)) return report;
  double al = 0.0, cl = 0.0;
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.batch_size), rng);
    std::tie(al, cl) = step_batch(batch);
    ++report.updates;
  }
  report.values["actor_loss"] = al;
  report.values["critic_loss"] = cl;
  return report;
}

// ---------------------------------------------------------------------------
// DeterministicAcLearner (DDPG / TD3)

DeterministicAcLearner::DeterministicAcLearner(AcConfig config, DetAcVariant variant,
                                               BoxActionSpace space,
                                               ExplorationConfig exploration, unsigned long seed)
    : config_(config),
      variant_(variant),
      space_(std::move(space)),
      actor_opt_(OptimizerConfig{OptimizerKind::AdamW, config.actor_lr}),
      critic_opt_(OptimizerConfig{OptimizerKind::AdamW, config.critic_lr}),
      exploration_(exploration),
      noise_rng_(seed ^ 0x9e3779b97f4a7c15ull) {
  if (config_.action_dim != space_.dim()) throw ConfigError("action_dim/space mismatch");
  actor_spec_.input_dim = config_.state_dim;
  actor_spec_.hidden_dims = config_.hidden_dims;
  actor_spec_.output_dim = config_.action_dim;
  critic_spec_.input_dim = config_.state_dim + config_.action_dim;
  critic_spec_.hidden_dims = config_.hidden_dims;
  critic_spec_.output_dim = 1;
  Rng rng(seed);
  init_mlp(params_, "actor", actor_spec_, rng);
  init_mlp(params_, "c1", critic_spec_, rng);
  if (variant_ == DetAcVariant::Td3) init_mlp(params_, "c2", critic_spec_, rng);
  target_params_ = params_;
}

Vector DeterministicAcLearner::policy_action(const Vector& state) const {
  Tensor raw = eval_mlp(params_, "actor", actor_spec_, state.transpose());
  Vector mid = 0.5 * (space_.high + space_.low);
  Vector half = 0.5 * (space_.high - space_.low);
  Vector out(config_.action_dim);
  for (long i = 0; i < out.size(); ++i) out(i) = mid(i) + half(i) * std::tanh(raw(0, i));
  return out;
}

Vector DeterministicAcLearner::act_box(const SubjectiveState& state, const BoxActionSpace& space,
                                       bool exploit, Rng& rng) {
  Vector a = policy_action(state);
  if (exploit) return a;
  return exploration_.explore_continuous(a, space, rng);
}

double DeterministicAcLearner::critic_reward(const Transition& t) const {
  if (safety_ && safety_->kind == SafetyKind::RewardConstrained)
    return rcpo_penalized_reward(t.reward, t.cost, safety_->lambda);
  return t.reward;
}

double DeterministicAcLearner::step_batch(const std::vector<const Transition*>& batch) {
  const long b = static_cast<long>(batch.size());
  const Vector mid = 0.5 * (space_.high + space_.low);
  const Vector half = 0.5 * (space_.high - space_.low);

  // Target actions from the target actor (+ TD3 smoothing noise).
  Tensor next_states = stack_states(batch, true);
  Tensor raw_next = eval_mlp(target_params_, "actor", actor_spec_, next_states);
  Tensor next_actions(b, config_.action_dim);
  std::normal_distribution<double> smooth(0.0, config_.smoothing_sigma);
  for (long i = 0; i < b; ++i)
    for (long j = 0; j < config_.action_dim; ++j) {
      double a = mid(j) + half(j) * std::tanh(raw_next(i, j));
      if (variant_ == DetAcVariant::Td3) {
        double eps = std::clamp(smooth(noise_rng_), -config_.smoothing_clip,
                                config_.smoothing_clip);
        a += eps;
      }
      next_actions(i, j) = std::clamp(a, space_.low(j), space_.high(j));
    }

  Tensor next_in(b, config_.state_dim + config_.action_dim);
  next_in << next_states, next_actions;
  Tensor q1t = eval_mlp(target_params_, "c1", critic_spec_, next_in);
  Tensor q2t = variant_ == DetAcVariant::Td3 ? eval_mlp(target_params_, "c2", critic_spec_, next_in)
                                             : q1t;
  Vector targets(b);
  for (long i = 0; i < b; ++i) {
    const auto& t = *batch[static_cast<std::size_t>(i)];
    const double qn = std::min(q1t(i, 0), q2t(i, 0));
    targets(i) = critic_reward(t) + (t.terminated ? 0.0 : config_.gamma * qn);
  }

  // Critic step.
  double critic_loss;
  {
    Tape tape;
    auto p = tape.bind(params_);
    Tensor curr_in(b, config_.state_dim + config_.action_dim);
    curr_in << stack_states(batch, false), stack_taken_reprs(batch);
    Var input = tape.constant(curr_in);
    Var tgt = tape.constant(Tensor(targets));
    Var loss = tape.mean(tape.square(tape.sub(forward_mlp(tape, p, "c1", critic_spec_, input), tgt)));
    if (variant_ == DetAcVariant::Td3)
      loss = tape.add(loss, tape.mean(tape.square(
                                tape.sub(forward_mlp(tape, p, "c2", critic_spec_, input), tgt))));
    critic_loss = loss.value()(0, 0);
    if (!std::isfinite(critic_loss)) throw TrainingError("non-finite critic loss");
    tape.backward(loss);
    critic_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "c"));
  }
  ++critic_updates_;

  // Delayed actor step + target updates.
  const long delay = variant_ == DetAcVariant::Td3 ? config_.actor_delay : 1;
  if (critic_updates_ % delay == 0) {
    Tape tape;
    auto p = tape.bind(params_);
    Var states = tape.constant(stack_states(batch, false));
    Var raw = forward_mlp(tape, p, "actor", actor_spec_, states);
    Var squashed = tape.tanh(raw);
    Var actions = tape.add_rowvec(tape.mul(squashed, tape.constant(Tensor(half.transpose().replicate(b, 1)))),
                                  tape.constant(Tensor(mid.transpose())));
    Var input = tape.concat_cols(states, actions);
    Var q = forward_mlp(tape, p, "c1", critic_spec_, input);
    Var loss = tape.neg(tape.mean(q));
    if (!std::isfinite(loss.value()(0, 0))) throw TrainingError("non-finite actor loss");
    tape.backward(loss);
    actor_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "actor"));
    ++actor_updates_;
    soft_update(target_params_, params_, config_.tau);
  }

  if (safety_ && safety_->kind == SafetyKind::RewardConstrained) rcpo_round(batch);
  return critic_loss;
}

void DeterministicAcLearner::rcpo_round(const std::vector<const Transition*>& batch) {
  if (!safety_->cost_critic) throw ConfigError("RCPO requires a cost critic");
  // Policy's next actions for the cost critic's TD target.
  Tensor next_states = stack_states(batch, true);
  Tensor raw_next = eval_mlp(target_params_, "actor", actor_spec_, next_states);
  const Vector mid = 0.5 * (space_.high + space_.low);
  const Vector half = 0.5 * (space_.high - space_.low);
  Tensor next_actions(raw_next.rows(), config_.action_dim);
  for (long i = 0; i < raw_next.rows(); ++i)
    for (long j = 0; j < config_.action_dim; ++j)
      next_actions(i, j) = mid(j) + half(j) * std::tanh(raw_next(i, j));
  std::vector<Transition> owned;  // cost critic takes values, not pointers
  owned.reserve(batch.size());
  for (const auto* t : batch) owned.push_back(*t);
  safety_->cost_critic->update(owned, next_actions);
  const double j_hat = safety_->cost_critic->estimate_normalized_cost(owned);
  safety_->lambda =
      rcpo_lambda_update(safety_->lambda, j_hat, safety_->alpha, safety_->lambda_lr);
}

LossReport DeterministicAcLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (buffer.size() < static_cast<std::size_t>(config_.batch_size)) return report;
  double loss = 0.0;
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.batch_size), rng);
    loss = step_batch(batch);
    ++report.updates;
  }
  report.values["critic_loss"] = loss;
  return report;
}

// ---------------------------------------------------------------------------
// ContinuousSacLearner

ContinuousSacLearner::ContinuousSacLearner(AcConfig config, BoxActionSpace space,
                                           unsigned long seed)
    : config_(config),
      space_(std::move(space)),
      actor_opt_(OptimizerConfig{OptimizerKind::AdamW, config.actor_lr}),
      critic_opt_(OptimizerConfig{OptimizerKind::AdamW, config.critic_lr}),
      noise_rng_(seed ^ 0x5851f42d4c957f2dull) {
  if (config_.action_dim != space_.dim()) throw ConfigError("action_dim/space mismatch");
  actor_spec_.input_dim = config_.state_dim;
  actor_spec_.hidden_dims = config_.hidden_dims;
  actor_spec_.output_dim = 2 * config_.action_dim;
  critic_spec_.input_dim = config_.state_dim + config_.action_dim;
  critic_spec_.hidden_dims = config_.hidden_dims;
  critic_spec_.output_dim = 1;
  Rng rng(seed);
  init_mlp(params_, "actor", actor_spec_, rng);
  init_mlp(params_, "q1", critic_spec_, rng);
  init_mlp(params_, "q2", critic_spec_, rng);
  target_params_ = params_;
}

Vector ContinuousSacLearner::policy_mean(const Vector& state) const {
  Tensor raw = eval_mlp(params_, "actor", actor_spec_, state.transpose());
  Vector mid = 0.5 * (space_.high + space_.low);
  Vector half = 0.5 * (space_.high - space_.low);
  Vector out(config_.action_dim);
  for (long i = 0; i < out.size(); ++i) out(i) = mid(i) + half(i) * std::tanh(raw(0, i));
  return out;
}

Vector ContinuousSacLearner::act_box(const SubjectiveState& state, const BoxActionSpace& space,
                                     bool exploit, Rng& rng) {
  if (exploit) return policy_mean(state);
  Tensor raw = eval_mlp(params_, "actor", actor_spec_, state.transpose());
  Vector mid = 0.5 * (space.high + space.low);
  Vector half = 0.5 * (space.high - space.low);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(config_.action_dim);
  for (long i = 0; i < out.size(); ++i) {
    const double mean = raw(0, i);
    const double log_std = std::clamp(raw(0, i + config_.action_dim), -5.0, 2.0);
    const double u = mean + std::exp(log_std) * normal(rng);
    out(i) = mid(i) + half(i) * std::tanh(u);
  }
  return out;
}

std::pair<double, double> ContinuousSacLearner::step_batch(
    const std::vector<const Transition*>& batch) {
  const long b = static_cast<long>(batch.size());
  const long ad = config_.action_dim;
  const double alpha = config_.entropy_coef;
  const Vector mid = 0.5 * (space_.high + space_.low);
  const Vector half = 0.5 * (space_.high - space_.low);

  // Soft targets from a fresh sample at s'.
  Vector targets(b);
  {
    Tensor next_states = stack_states(batch, true);
    Tensor raw = eval_mlp(params_, "actor", actor_spec_, next_states);
    Tensor next_actions(b, ad);
    Vector log_pi = Vector::Zero(b);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (long i = 0; i < b; ++i)
      for (long j = 0; j < ad; ++j) {
        const double mean = raw(i, j);
        const double log_std = std::clamp(raw(i, j + ad), -5.0, 2.0);
        const double eps = normal(noise_rng_);
        const double u = mean + std::exp(log_std) * eps;
        const double t = std::tanh(u);
        next_actions(i, j) = mid(j) + half(j) * t;
        log_pi(i) += -0.5 * eps * eps - log_std - kHalfLog2Pi -
                     std::log(std::max(1.0 - t * t, 1e-12)) - std::log(half(j));
      }
    Tensor next_in(b, config_.state_dim + ad);
    next_in << next_states, next_actions;
    Tensor q1t = eval_mlp(target_params_, "q1", critic_spec_, next_in);
    Tensor q2t = eval_mlp(target_params_, "q2", critic_spec_, next_in);
    for (long i = 0; i < b; ++i) {
      const auto& t = *batch[static_cast<std::size_t>(i)];
      const double soft = std::min(q1t(i, 0), q2t(i, 0)) - alpha * log_pi(i);
      targets(i) = t.reward + (t.terminated ? 0.0 : config_.gamma * soft);
    }
  }

  // Critic step.
  double critic_loss;
  {
    Tape tape;
    auto p = tape.bind(params_);
    Tensor curr_in(b, config_.state_dim + ad);
    curr_in << stack_states(batch, false), stack_taken_reprs(batch);
    Var input = tape.constant(curr_in);
    Var tgt = tape.constant(Tensor(targets));
    Var loss = tape.add(
        tape.mean(tape.square(tape.sub(forward_mlp(tape, p, "q1", critic_spec_, input), tgt))),
        tape.mean(tape.square(tape.sub(forward_mlp(tape, p, "q2", critic_spec_, input), tgt))));
    critic_loss = loss.value()(0, 0);
    if (!std::isfinite(critic_loss)) throw TrainingError("non-finite SAC critic loss");
    tape.backward(loss);
    critic_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "q"));
  }

  // Actor step with the reparameterization trick.
  double actor_loss;
  {
    Tape tape;
    auto p = tape.bind(params_);
    Var states = tape.constant(stack_states(batch, false));
    Var raw = forward_mlp(tape, p, "actor", actor_spec_, states);
    Var mean = tape.slice_cols(raw, 0, ad);
    Var log_std = tape.clamp(tape.slice_cols(raw, ad, ad), -5.0, 2.0);
    Var std = tape.exp(log_std);
    Tensor eps = gaussian_tensor(b, ad, noise_rng_);
    Var u = tape.add(mean, tape.mul(std, tape.constant(eps)));
    Var t = tape.tanh(u);
    Var actions = tape.add_rowvec(
        tape.mul(t, tape.constant(Tensor(half.transpose().replicate(b, 1)))),
        tape.constant(Tensor(mid.transpose())));
    // log pi = sum_j [-eps^2/2 - log std - 0.5 log 2pi - log(1 - tanh^2) - log half]
    Tensor eps_term(b, 1);
    for (long i = 0; i < b; ++i) {
      double acc = 0.0;
      for (long j = 0; j < ad; ++j)
        acc += -0.5 * eps(i, j) * eps(i, j) - kHalfLog2Pi - std::log(half(j));
      eps_term(i, 0) = acc;
    }
    Var one_minus_t2 = tape.add_scalar(tape.neg(tape.square(t)), 1.0 + 1e-12);
    Var log_pi = tape.add(
        tape.constant(eps_term),
        tape.row_sum(tape.neg(tape.add(log_std, tape.log(one_minus_t2)))));
    Var input = tape.concat_cols(states, actions);
    Var q = tape.min(forward_mlp(tape, p, "q1", critic_spec_, input),
                     forward_mlp(tape, p, "q2", critic_spec_, input));
    Var loss = tape.mean(tape.sub(tape.scale(log_pi, alpha), q));
    actor_loss = loss.value()(0, 0);
    if (!std::isfinite(actor_loss)) throw TrainingError("non-finite SAC actor loss");
    tape.backward(loss);
    actor_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "actor"));
  }

  soft_update(target_params_, params_, config_.tau);
  return {actor_loss, critic_loss};
}

LossReport ContinuousSacLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (buffer.size() < static_cast<std::size_t>(config_.batch_size)) return report;
  double al = 0.0, cl = 0.0;
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.batch_size), rng);
    std::tie(al, cl) = step_batch(batch);
    ++report.updates;
  }
  report.values["actor_loss"] = al;
  report.values["critic_loss"] = cl;
  return report;
}

}  // namespace pearl
