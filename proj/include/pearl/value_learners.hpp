#pragma once

#include <memory>

#include "pearl/autodiff.hpp"
#include "pearl/nn.hpp"
#include "pearl/optim.hpp"
#include "pearl/policy_learner.hpp"

namespace pearl {

enum class QVariant { Dqn, DoubleDqn, DuelingDqn, Sarsa };
enum class TdVariant { Dqn, Double, Sarsa };

struct QLearnerConfig {
  long state_dim = 0;
  long action_repr_dim = 0;
  long num_action_slots = 0;  // padded slot count (max actions)
  std::vector<long> hidden_dims{64, 64};
  double lr = 1e-3;
  long batch_size = 32;
  long training_rounds = 1;
  long target_update_period = 10;
  double target_step_size = 1.0;  // 0.1 for SARSA
  double gamma = 0.99;
  QVariant variant = QVariant::Dqn;
  bool huber = false;  // plain DQN uses MSE by default
};

// Q-values with -inf written over unavailable slots.
Vector masked_q_values(const Vector& q, const Tensor& mask_row);

// Bellman targets from precomputed next-state Q matrices (b x A, unmasked);
// masking and terminal handling happen here. next_q_online is only read for
// the Double variant; Sarsa reads next_action_index from the transitions.
Vector td_targets(TdVariant variant, const std::vector<const Transition*>& batch,
                  const Tensor& next_q_target, const Tensor& next_q_online, double gamma);

// Slot-factored Q-network: a scalar head evaluated per action slot on
// concat(state, action representation). The dueling variant shares a state
// torso between the value and advantage streams.
class QNetwork {
 public:
  QNetwork() = default;
  QNetwork(long state_dim, long repr_dim, std::vector<long> hidden_dims, bool dueling,
           long outputs_per_slot = 1);

  void init(ParameterSet& params, const std::string& prefix, Rng& rng) const;

  // b x (A * outputs_per_slot) — slot-major blocks. For scalar heads this is
  // the b x A Q matrix. slot_reprs(a) returns the b x repr_dim tensor of
  // slot a's representations.
  Var forward(Tape& tape, const Tape::Params& p, const std::string& prefix, Var states,
              const std::function<Tensor(long)>& slot_reprs, long num_slots,
              const Tensor& mask) const;

  // Head applied to pre-concatenated (state, action repr) rows; non-dueling.
  Var forward_single(Tape& tape, const Tape::Params& p, const std::string& prefix,
                     Var input) const;

  // Convenience: plain evaluation of all slots for one state -> A x outputs.
  Tensor eval_slots(const ParameterSet& params, const std::string& prefix, const Vector& state,
                    const Tensor& action_reprs, const Tensor& mask_row) const;

  long outputs_per_slot() const { return outputs_; }
  bool dueling() const { return dueling_; }

 private:
  long state_dim_ = 0;
  long repr_dim_ = 0;
  long outputs_ = 1;
  bool dueling_ = false;
  MlpSpec main_spec_;   // plain: (S+R) -> hidden -> outputs
  MlpSpec torso_spec_;  // dueling: S -> hidden
  MlpSpec value_spec_;  // dueling: hidden -> outputs
  MlpSpec adv_spec_;    // dueling: hidden + R -> outputs
};

// DQN / Double DQN / Dueling DQN / Deep SARSA.
class DeepQLearner : public PolicyLearner {
 public:
  DeepQLearner(QLearnerConfig config, ExplorationConfig exploration, unsigned long seed);

  long act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                    const Tensor& mask_row, bool exploit, Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return true; }
  BufferKind required_buffer() const override {
    return config_.variant == QVariant::Sarsa ? BufferKind::Episodic
                                              : BufferKind::FifoOffPolicy;
  }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }
  ExplorationModule* exploration() override { return &exploration_; }
  void set_summarizer(HistorySummarizer* s) override { summarizer_ = s; }

  const QLearnerConfig& config() const { return config_; }
  const ParameterSet& target_parameters() const { return target_params_; }
  long update_count() const { return update_count_; }

  // One gradient step on an explicit batch; exposed for tests and reuse.
  double step_batch(const std::vector<const Transition*>& batch);

  // Online-net Q per action slot for one state (unmasked).
  Vector q_values(const Vector& state, const Tensor& action_reprs, const Tensor& mask_row) const {
    return net_.eval_slots(params_, "q", state, action_reprs, mask_row).col(0);
  }

 private:
  Tensor batch_q(const ParameterSet& params, const std::vector<const Transition*>& batch,
                 bool next) const;

  QLearnerConfig config_;
  QNetwork net_;
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer optimizer_;
  std::unique_ptr<Optimizer> summarizer_opt_;
  ExplorationModule exploration_;
  HistorySummarizer* summarizer_ = nullptr;
  long update_count_ = 0;
};

// Bootstrapped DQN: K independent members trained on Bernoulli-masked data;
// deep exploration picks one member per episode.
class BootstrappedQLearner : public PolicyLearner {
 public:
  BootstrappedQLearner(QLearnerConfig config, long ensemble_size, double mask_probability,
                       unsigned long seed);

  long act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                    const Tensor& mask_row, bool exploit, Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;
  void on_episode_start(Rng& rng) override { exploration_.resample_episode_index(rng); }

  bool discrete() const override { return true; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }
  ExplorationModule* exploration() override { return &exploration_; }
  long ensemble_size() const override { return ensemble_k_; }
  double mask_probability() const { return mask_p_; }
  long member_index() const { return exploration_.episode_index(); }

 private:
  std::string prefix(long k) const { return "q" + std::to_string(k); }

  QLearnerConfig config_;
  long ensemble_k_;
  double mask_p_;
  QNetwork net_;
  ParameterSet params_;         // all members, prefixed q0., q1., ...
  ParameterSet target_params_;
  Optimizer optimizer_;
  ExplorationModule exploration_;
  long update_count_ = 0;
};

struct QrdqnConfig {
  QLearnerConfig base;     // lr 5e-4, hidden {64,64} per benchmark setup
  long num_quantiles = 10;
  double kappa = 1.0;
};

// Quantile-regression DQN; risk sensitivity enters through the safety
// module's mean-variance Q map at greedy-action selection.
class QuantileQLearner : public PolicyLearner {
 public:
  QuantileQLearner(QrdqnConfig config, ExplorationConfig exploration, unsigned long seed);

  long act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                    const Tensor& mask_row, bool exploit, Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return true; }
  bool distributional() const override { return true; }
  long state_dim() const override { return config_.base.state_dim; }
  long batch_size() const override { return config_.base.batch_size; }
  ParameterSet& parameters() override { return params_; }
  ExplorationModule* exploration() override { return &exploration_; }
  void set_safety(SafetyModule* s) override { safety_ = s; }

  // A x N quantiles for one state.
  Tensor quantiles(const Vector& state, const Tensor& action_reprs,
                   const Tensor& mask_row) const;
  double step_batch(const std::vector<const Transition*>& batch);

 private:
  double risk_beta() const;
  Vector risk_q(const Tensor& quantile_matrix, const Tensor& mask_row) const;

  QrdqnConfig config_;
  QNetwork net_;
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer optimizer_;
  ExplorationModule exploration_;
  const SafetyModule* safety_ = nullptr;
  long update_count_ = 0;
};

}  // namespace pearl
