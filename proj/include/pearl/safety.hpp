#pragma once

#include <functional>
#include <memory>
#include <optional>

#include "pearl/action_space.hpp"
#include "pearl/nn.hpp"
#include "pearl/optim.hpp"
#include "pearl/transition.hpp"

namespace pearl {

// Per-action quantile estimates of the return distribution Z(s, a):
// one row per action, N quantile values per row.
struct ReturnDistribution {
  Tensor quantiles;  // A x N

  long action_count() const { return quantiles.rows(); }
  long num_quantiles() const { return quantiles.cols(); }
};

Vector mean_variance_q(const ReturnDistribution& dist, double beta);

double rcpo_penalized_reward(double r, std::optional<double> cost, double lambda);
double rcpo_lambda_update(double lambda, double estimated_cost_j, double alpha, double lambda_lr);

// User-provided predicate restricting the action space before scoring.
using SafePredicate = std::function<bool(const Vector& state, long action_index,
                                         const Vector& action_repr)>;

DiscreteActionSpace filter_action(const SafePredicate& pred, const Vector& state,
                                  const DiscreteActionSpace& space);

enum class SafetyKind { None, Filter, MeanVariance, RewardConstrained };

// TD(0) critic for the discounted cost-to-go, mirroring the reward critic's
// target structure. Used by RCPO to estimate J = (1 - gamma) * cost-to-go.
class CostCritic {
 public:
  CostCritic(long state_dim, long action_dim, std::vector<long> hidden_dims,
             OptimizerConfig opt_config, double gamma, double target_update_tau);

  // Returns the batch TD loss. `next_action_reprs` are the policy's next
  // actions (b x action_dim).
  double update(const std::vector<Transition>& batch, const Tensor& next_action_reprs);
  double value(const Vector& state, const Vector& action_repr) const;
  // (1 - gamma) * mean predicted cost-to-go over the batch's (s, a) pairs.
  double estimate_normalized_cost(const std::vector<Transition>& batch) const;

  ParameterSet& parameters() { return params_; }

 private:
  MlpSpec spec_;
  ParameterSet params_;
  ParameterSet target_params_;
  Optimizer optimizer_;
  double gamma_;
  double tau_;
};

struct SafetyModule {
  SafetyKind kind = SafetyKind::None;
  SafePredicate predicate;  // Filter
  double beta = 0.0;        // MeanVariance
  // RewardConstrained
  double alpha = 0.1;
  double lambda = 0.0;
  double lambda_lr = 1e-2;
  std::shared_ptr<CostCritic> cost_critic;

  static SafetyModule none() { return {}; }
  static SafetyModule filter(SafePredicate pred);
  static SafetyModule mean_variance(double beta);
  static SafetyModule reward_constrained(double alpha, double lambda_lr,
                                         std::shared_ptr<CostCritic> critic);

  DiscreteActionSpace apply_filter(const Vector& state, const DiscreteActionSpace& space) const;
};

}  // namespace pearl
