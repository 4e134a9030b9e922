#pragma once

#include <memory>

#include "pearl/autodiff.hpp"
#include "pearl/nn.hpp"
#include "pearl/optim.hpp"
#include "pearl/policy_learner.hpp"
#include "pearl/value_learners.hpp"

namespace pearl {

struct AcConfig {
  long state_dim = 0;
  long action_repr_dim = 0;   // discrete learners
  long num_action_slots = 0;  // discrete learners
  long action_dim = 0;        // continuous learners
  std::vector<long> hidden_dims{64, 64};
  double actor_lr = 1e-4;
  double critic_lr = 1e-3;
  long batch_size = 32;
  long training_rounds = 1;
  double gamma = 0.99;
  double tau = 0.005;          // soft target updates
  double entropy_coef = 0.1;   // 0.1 discrete SAC, 0.25 continuous SAC
  double clip_low = 0.9;       // PPO
  double clip_high = 1.1;
  long actor_delay = 2;        // TD3
  double smoothing_sigma = 0.2;
  double smoothing_clip = 0.5;
};

// pi(a|s) = exp(logit_a) / sum over available exp(logit_a'); masked slots 0.
Vector dynamic_actor_probs(const Vector& logits, const Tensor& mask_row);
// Exact expectation sum_a pi(a) * Q(a) over available actions.
double dynamic_critic_expectation(const Vector& q, const Vector& probs, const Tensor& mask_row);
// G_t = sum_{k>=t} gamma^{k-t} r_k over one episode.
Vector suffix_returns(const std::vector<const Transition*>& episode, double gamma);

// Shared logit network for dynamic discrete actors: f(s, a-repr) -> logit.
class DynamicActor {
 public:
  DynamicActor() = default;
  DynamicActor(long state_dim, long repr_dim, std::vector<long> hidden_dims);

  void init(ParameterSet& params, const std::string& prefix, Rng& rng) const;
  // b x A logits over padded slots.
  Var logits(Tape& tape, const Tape::Params& p, const std::string& prefix, Var states,
             const std::function<Tensor(long)>& slot_reprs, long num_slots) const;
  Vector eval_logits(const ParameterSet& params, const std::string& prefix, const Vector& state,
                     const Tensor& action_reprs) const;

 private:
  MlpSpec spec_;
};

// REINFORCE over complete episodes with a dynamic discrete actor.
class ReinforceLearner : public PolicyLearner {
 public:
  ReinforceLearner(AcConfig config, ExplorationConfig exploration, unsigned long seed);

  long act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                    const Tensor& mask_row, bool exploit, Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return true; }
  BufferKind required_buffer() const override { return BufferKind::Episodic; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }
  ExplorationModule* exploration() override { return &exploration_; }
  std::optional<double> last_log_prob() const override { return last_log_prob_; }

  double step_episode(const std::vector<const Transition*>& episode);
  Vector policy_probs(const Vector& state, const Tensor& action_reprs,
                      const Tensor& mask_row) const;

 protected:
  AcConfig config_;
  DynamicActor actor_;
  ParameterSet params_;
  Optimizer actor_opt_;
  ExplorationModule exploration_;
  std::optional<double> last_log_prob_;
};

// PPO with a clipped surrogate and a suffix-return value baseline.
class PpoLearner : public PolicyLearner {
 public:
  PpoLearner(AcConfig config, ExplorationConfig exploration, unsigned long seed);

  long act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                    const Tensor& mask_row, bool exploit, Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return true; }
  BufferKind required_buffer() const override { return BufferKind::Episodic; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }
  ExplorationModule* exploration() override { return &exploration_; }
  std::optional<double> last_log_prob() const override { return last_log_prob_; }

  // One clipped-surrogate step over a batch of flattened episode transitions;
  // returns (actor_loss, critic_loss).
  std::pair<double, double> step_batch(const std::vector<const Transition*>& batch,
                                       const Vector& returns);
  Vector policy_probs(const Vector& state, const Tensor& action_reprs,
                      const Tensor& mask_row) const;
  double value(const Vector& state) const;

 private:
  AcConfig config_;
  DynamicActor actor_;
  MlpSpec value_spec_;
  ParameterSet params_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  ExplorationModule exploration_;
  std::optional<double> last_log_prob_;
};

// Discrete soft actor-critic: twin slot-factored critics + dynamic actor,
// expectations computed exactly over the available action set.
class DiscreteSacLearner : public PolicyLearner {
 public:
  DiscreteSacLearner(AcConfig config, ExplorationConfig exploration, unsigned long seed);

  long act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                    const Tensor& mask_row, bool exploit, Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return true; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }
  ExplorationModule* exploration() override { return &exploration_; }

  std::pair<double, double> step_batch(const std::vector<const Transition*>& batch);
  Vector policy_probs(const Vector& state, const Tensor& action_reprs,
                      const Tensor& mask_row) const;
  Vector min_q(const Vector& state, const Tensor& action_reprs, const Tensor& mask_row) const;

 private:
  AcConfig config_;
  DynamicActor actor_;
  QNetwork critic_;
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  ExplorationModule exploration_;
};

// Deterministic continuous-control learners: DDPG and TD3.
enum class DetAcVariant { Ddpg, Td3 };

class DeterministicAcLearner : public PolicyLearner {
 public:
  DeterministicAcLearner(AcConfig config, DetAcVariant variant, BoxActionSpace space,
                         ExplorationConfig exploration, unsigned long seed);

  Vector act_box(const SubjectiveState& state, const BoxActionSpace& space, bool exploit,
                 Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return false; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }
  ExplorationModule* exploration() override { return &exploration_; }
  void set_safety(SafetyModule* s) override { safety_ = s; }

  double step_batch(const std::vector<const Transition*>& batch);
  Vector policy_action(const Vector& state) const;
  long actor_updates() const { return actor_updates_; }
  long critic_updates() const { return critic_updates_; }

 private:
  double critic_reward(const Transition& t) const;
  void rcpo_round(const std::vector<const Transition*>& batch);

  AcConfig config_;
  DetAcVariant variant_;
  BoxActionSpace space_;
  MlpSpec actor_spec_;
  MlpSpec critic_spec_;
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  ExplorationModule exploration_;
  SafetyModule* safety_ = nullptr;
  Rng noise_rng_;
  long critic_updates_ = 0;
  long actor_updates_ = 0;
};

// Continuous SAC with a tanh-squashed Gaussian policy and twin critics.
class ContinuousSacLearner : public PolicyLearner {
 public:
  ContinuousSacLearner(AcConfig config, BoxActionSpace space, unsigned long seed);

  Vector act_box(const SubjectiveState& state, const BoxActionSpace& space, bool exploit,
                 Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return false; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }

  std::pair<double, double> step_batch(const std::vector<const Transition*>& batch);
  // Mean (deterministic) policy action.
  Vector policy_mean(const Vector& state) const;

 private:
  AcConfig config_;
  BoxActionSpace space_;
  MlpSpec actor_spec_;   // state -> [mean | log_std]
  MlpSpec critic_spec_;  // (state, action) -> 1
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  Rng noise_rng_;
};

}  // namespace pearl
