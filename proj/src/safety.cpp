#include "pearl/safety.hpp"

#include <cmath>

#include "pearl/autodiff.hpp"

namespace pearl {

Vector mean_variance_q(const ReturnDistribution& dist, double beta) {
  if (dist.num_quantiles() < 1) throw DimensionError("return distribution needs >= 1 quantile");
  if (beta < 0) throw ConfigError("beta must be >= 0");
  Vector q(dist.action_count());
  for (long a = 0; a < dist.action_count(); ++a) {
    const double mean = dist.quantiles.row(a).mean();
    const double var =
        (dist.quantiles.row(a).array() - mean).square().mean();  // population variance
    q(a) = mean - beta * var;
  }
  return q;
}

double rcpo_penalized_reward(double r, std::optional<double> cost, double lambda) {
  if (lambda < 0) throw ConfigError("lambda must be >= 0");
  if (!cost) throw ConfigError("RCPO requires transitions to carry costs");
  return r - lambda * *cost;
}

double rcpo_lambda_update(double lambda, double estimated_cost_j, double alpha,
                          double lambda_lr) {
  if (!std::isfinite(lambda) || !std::isfinite(estimated_cost_j) || !std::isfinite(alpha) ||
      !std::isfinite(lambda_lr))
    throw TrainingError("rcpo_lambda_update: non-finite input");
  return std::max(0.0, lambda + lambda_lr * (estimated_cost_j - alpha));
}

DiscreteActionSpace filter_action(const SafePredicate& pred, const Vector& state,
                                  const DiscreteActionSpace& space) {
  DiscreteActionSpace out = space;
  for (long a = 0; a < out.size(); ++a) {
    if (!out.available[static_cast<std::size_t>(a)]) continue;
    if (!pred(state, a, out.representations.row(a).transpose()))
      out.available[static_cast<std::size_t>(a)] = 0;
  }
  return out;
}

CostCritic::CostCritic(long state_dim, long action_dim, std::vector<long> hidden_dims,
                       OptimizerConfig opt_config, double gamma, double target_update_tau)
    : optimizer_(opt_config), gamma_(gamma), tau_(target_update_tau) {
  spec_.input_dim = state_dim + action_dim;
  spec_.hidden_dims = std::move(hidden_dims);
  spec_.output_dim = 1;
  Rng rng(20240);
  init_mlp(params_, "cost", spec_, rng);
  target_params_ = params_;
}

double CostCritic::value(const Vector& state, const Vector& action_repr) const {
  Vector input(state.size() + action_repr.size());
  input << state, action_repr;
  return eval_mlp(params_, "cost", spec_, input.transpose())(0, 0);
}

double CostCritic::estimate_normalized_cost(const std::vector<Transition>& batch) const {
  if (batch.empty()) throw UsageError("empty batch");
  double acc = 0.0;
  for (const auto& t : batch) acc += value(t.state, t.action_repr);
  return (1.0 - gamma_) * (acc / static_cast<double>(batch.size()));
}

double CostCritic::update(const std::vector<Transition>& batch, const Tensor& next_action_reprs) {
  if (batch.empty()) throw UsageError("empty batch");
  const long b = static_cast<long>(batch.size());
  Tensor inputs(b, spec_.input_dim);
  Vector targets(b);
  for (long i = 0; i < b; ++i) {
    const auto& t = batch[static_cast<std::size_t>(i)];
    if (!t.cost) throw ConfigError("cost critic requires transitions with costs");
    inputs.row(i) << t.state.transpose(), t.action_repr.transpose();
    Vector next_in(t.next_state.size() + next_action_reprs.cols());
    next_in << t.next_state, next_action_reprs.row(i).transpose();
    const double next_v = eval_mlp(target_params_, "cost", spec_, next_in.transpose())(0, 0);
    const double not_done = t.terminated ? 0.0 : 1.0;
    targets(i) = *t.cost + gamma_ * not_done * next_v;
  }

  Tape tape;
  auto params = tape.bind(params_);
  auto pred = forward_mlp(tape, params, "cost", spec_, tape.constant(inputs));
  auto err = tape.sub(pred, tape.constant(targets));
  auto loss = tape.mean(tape.square(err));
  tape.backward(loss);
  optimizer_.step(params_, tape.gradients(params_, params));
  soft_update(target_params_, params_, tau_);
  return loss.value()(0, 0);
}

SafetyModule SafetyModule::filter(SafePredicate pred) {
  SafetyModule m;
  m.kind = SafetyKind::Filter;
  m.predicate = std::move(pred);
  return m;
}

SafetyModule SafetyModule::mean_variance(double beta) {
  if (beta < 0) throw ConfigError("beta must be >= 0");
  SafetyModule m;
  m.kind = SafetyKind::MeanVariance;
  m.beta = beta;
  return m;
}

SafetyModule SafetyModule::reward_constrained(double alpha, double lambda_lr,
                                              std::shared_ptr<CostCritic> critic) {
  SafetyModule m;
  m.kind = SafetyKind::RewardConstrained;
  m.alpha = alpha;
  m.lambda_lr = lambda_lr;
  m.cost_critic = std::move(critic);
  return m;
}

DiscreteActionSpace SafetyModule::apply_filter(const Vector& state,
                                               const DiscreteActionSpace& space) const {
  if (kind != SafetyKind::Filter) return space;
  return filter_action(predicate, state, space);
}

}  // namespace pearl
