#pragma once

#include <filesystem>

#include "pearl/action_space.hpp"
#include "pearl/exploration.hpp"
#include "pearl/nn.hpp"
#include "pearl/optim.hpp"

namespace pearl {

// ---------------------------------------------------------------------------
// Linear bandit machinery: A = I + sum phi phi^T, theta_hat = A^-1 b, with
// rank-1 (Sherman-Morrison) inverse maintenance and periodic re-factorization.

class LinearBanditModel {
 public:
  explicit LinearBanditModel(long dim);

  void update(const Vector& phi, double reward);
  double predict(const Vector& phi) const;  // theta_hat . phi
  double bonus(const Vector& phi) const;    // sqrt(phi^T A^-1 phi)

  long dim() const { return dim_; }
  long updates() const { return updates_; }
  const Vector& theta() const { return theta_; }
  const Tensor& a_matrix() const { return a_; }

  // Exact inverse recomputed from A; called automatically every
  // `refactor_period` updates to bound rank-1 drift.
  void refactor();
  static constexpr long refactor_period = 1000;

 private:
  long dim_;
  Tensor a_;
  Tensor a_inv_;
  Vector b_;
  Vector theta_;
  long updates_ = 0;
};

// phi(x, a) = [context; action representation].
Vector feature_join(const Vector& context, const Vector& action_repr);

// ---------------------------------------------------------------------------
// Neural bandit: reward MLP over joined features; covariance accumulated over
// the network's last-hidden-layer features for UCB/TS bonuses.

struct NeuralBanditConfig {
  long input_dim = 0;                 // joined feature width
  std::vector<long> hidden_dims{64, 16};
  double lr = 0.01;
  long batch_size = 128;
};

class NeuralBanditModel {
 public:
  NeuralBanditModel(NeuralBanditConfig config, unsigned long seed);

  double predict(const Vector& phi) const;
  Vector last_layer_features(const Vector& phi) const;
  double bonus(const Vector& phi) const;

  // One MSE regression step over the batch, then one covariance rank-1 update
  // per sample. Returns the batch MSE.
  double update(const Tensor& features, const Vector& rewards);

  const NeuralBanditConfig& config() const { return config_; }
  const LinearBanditModel& covariance() const { return cov_; }

 private:
  NeuralBanditConfig config_;
  MlpSpec spec_;
  ParameterSet params_;
  Optimizer opt_;
  LinearBanditModel cov_;
};

// ---------------------------------------------------------------------------
// Acting and evaluation protocol.

// Predicted reward + bonus per action, handed to the exploration module.
// exploit = masked argmax on the means. Empty available set -> ContractError.
long bandit_act(const Vector& means, const Vector& bonuses,
                const std::vector<std::uint8_t>& mask, ExplorationModule& exploration, Rng& rng,
                bool exploit = false);

Vector linear_bandit_means(const LinearBanditModel& model, const Vector& context,
                           const DiscreteActionSpace& space);
Vector linear_bandit_bonuses(const LinearBanditModel& model, const Vector& context,
                             const DiscreteActionSpace& space);
Vector neural_bandit_means(const NeuralBanditModel& model, const Vector& context,
                           const DiscreteActionSpace& space);
Vector neural_bandit_bonuses(const NeuralBanditModel& model, const Vector& context,
                             const DiscreteActionSpace& space);

// r(x, a) = 1{a == y} + N(0, sigma).
double supervised_to_bandit_reward(long label, long action, double sigma, Rng& rng);

// Fits a reward MLP on logged (context, action, reward) rows; greedy policy is
// argmax_a model(join(x, a)).
NeuralBanditModel offline_greedy_baseline(const Tensor& contexts,
                                          const std::vector<long>& actions,
                                          const Vector& rewards,
                                          const DiscreteActionSpace& space,
                                          NeuralBanditConfig config, long epochs,
                                          unsigned long seed, Rng& rng);
long greedy_bandit_action(const NeuralBanditModel& model, const Vector& context,
                          const DiscreteActionSpace& space);

// ---------------------------------------------------------------------------
// Supervised CSV ingestion (header row; label column by name). Non-label
// columns must be numeric; labels become class indices in first-seen order.

struct SupervisedDataset {
  Tensor features;                       // rows x feature_dim
  std::vector<long> labels;              // class index per row
  std::vector<std::string> label_names;  // index -> original label token
};

SupervisedDataset load_supervised_csv(const std::filesystem::path& path,
                                      const std::string& label_column);

}  // namespace pearl
