#pragma once

#include <filesystem>
#include <fstream>

#include "pearl/actor_critic.hpp"
#include "pearl/value_learners.hpp"

namespace pearl {

// ---------------------------------------------------------------------------
// Offline datasets: one JSON metadata line followed by fixed-width binary
// records, so generation can stream appends and the loader can preallocate.

struct DatasetMeta {
  std::string env;
  std::string behavior_policy;
  unsigned long seed = 0;
  long size = 0;
  long state_dim = 0;
  long action_dim = 0;  // action representation width
  long num_slots = 0;   // 0 => continuous action records
};

class DatasetWriter {
 public:
  DatasetWriter(const std::filesystem::path& path, DatasetMeta meta);
  ~DatasetWriter();

  void append(const Transition& t);
  // Patches the record count into the header; further appends are an error.
  void close();
  long written() const { return written_; }

 private:
  DatasetMeta meta_;
  std::filesystem::path path_;
  std::ofstream out_;
  long written_ = 0;
  bool closed_ = false;
};

struct OfflineDataset {
  DatasetMeta meta;
  std::vector<Transition> transitions;
};

OfflineDataset load_dataset(const std::filesystem::path& path);
void fill_buffer(const OfflineDataset& dataset, ReplayBuffer& buffer);

class Environment;
class PearlAgent;

// Runs `behavior` on `env` for `steps` interactions (learning online when
// `learn` is set, mirroring the medium-dataset protocol) and streams every
// recorded transition to `path`. Returns the final metadata.
DatasetMeta generate_dataset(Environment& env, PearlAgent& behavior, long steps,
                             const std::filesystem::path& path, std::uint64_t seed,
                             const std::string& env_name = "",
                             const std::string& behavior_policy = "", bool learn = true);

// ---------------------------------------------------------------------------
// Scoring and warm starts.

// (agent - random) / (expert - random); requires expert > random.
double normalized_score(double random_return, double agent_return, double expert_return);

// Copies the offline learner's parameters into the online learner.
void warm_start(PolicyLearner& online, PolicyLearner& offline);

// ---------------------------------------------------------------------------
// CQL (discrete): TD loss + w * (logsumexp_a Q(s,a) - Q(s, a_data)).

// Penalty for one state's Q row; logsumexp runs over available slots only.
double cql_penalty(const Vector& q, const Tensor& mask_row, long data_action);

class CqlLearner : public PolicyLearner {
 public:
  CqlLearner(QLearnerConfig config, double cql_weight, ExplorationConfig exploration,
             unsigned long seed);

  long act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                    const Tensor& mask_row, bool exploit, Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return true; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }
  ExplorationModule* exploration() override { return &exploration_; }

  // Returns (td_loss, penalty) averaged over the batch.
  std::pair<double, double> step_batch(const std::vector<const Transition*>& batch);
  Vector q_values(const Vector& state, const Tensor& action_reprs, const Tensor& mask_row) const;

 private:
  QLearnerConfig config_;
  double cql_weight_;
  QNetwork net_;
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer opt_;
  ExplorationModule exploration_;
  long steps_since_sync_ = 0;
};

// ---------------------------------------------------------------------------
// IQL (continuous): expectile value net, twin critics, advantage-weighted
// regression actor.

struct IqlConfig {
  long state_dim = 0;
  long action_dim = 0;
  std::vector<long> hidden_dims{64, 64};
  double actor_lr = 1e-4;
  double critic_lr = 1e-4;  // per the offline adjustment
  double value_lr = 1e-3;
  double tau_soft = 0.05;  // critic target soft update
  double gamma = 0.99;
  double expectile_tau = 0.7;
  double temperature = 3.0;
  double weight_clip = 100.0;
  long batch_size = 32;
  long training_rounds = 1;
};

// exp(adv / temperature) clipped at `clip`.
Vector awr_weights(const Vector& advantages, double temperature, double clip);

class IqlLearner : public PolicyLearner {
 public:
  IqlLearner(IqlConfig config, BoxActionSpace space, unsigned long seed);

  Vector act_box(const SubjectiveState& state, const BoxActionSpace& space, bool exploit,
                 Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return false; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }

  // Returns (value_loss, critic_loss, actor_loss).
  std::tuple<double, double, double> step_batch(const std::vector<const Transition*>& batch);
  double value(const Vector& state) const;
  Vector policy_mean(const Vector& state) const;

 private:
  IqlConfig config_;
  BoxActionSpace space_;
  MlpSpec value_spec_;
  MlpSpec critic_spec_;
  MlpSpec actor_spec_;
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer value_opt_;
  Optimizer critic_opt_;
  Optimizer actor_opt_;
};

// ---------------------------------------------------------------------------
// TD3BC (continuous): TD3 critic updates; actor loss
// -lambda_hat * Q(s, mu(s)) + ||mu(s) - a_data||^2 with
// lambda_hat = bc_weight / mean |Q|.

class Td3BcLearner : public PolicyLearner {
 public:
  Td3BcLearner(AcConfig config, double bc_weight, BoxActionSpace space, unsigned long seed);

  Vector act_box(const SubjectiveState& state, const BoxActionSpace& space, bool exploit,
                 Rng& rng) override;
  LossReport learn(ReplayBuffer& buffer, Rng& rng) override;

  bool discrete() const override { return false; }
  long state_dim() const override { return config_.state_dim; }
  long batch_size() const override { return config_.batch_size; }
  ParameterSet& parameters() override { return params_; }

  // Returns (critic_loss, actor_loss); actor_loss is NaN on skipped (delayed)
  // actor rounds.
  std::pair<double, double> step_batch(const std::vector<const Transition*>& batch);
  Vector policy_action(const Vector& state) const;
  long actor_updates() const { return actor_updates_; }

 private:
  AcConfig config_;
  double bc_weight_;
  BoxActionSpace space_;
  MlpSpec actor_spec_;
  MlpSpec critic_spec_;
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer actor_opt_;
  Optimizer critic_opt_;
  Rng noise_rng_;
  long critic_updates_ = 0;
  long actor_updates_ = 0;
};

}  // namespace pearl
