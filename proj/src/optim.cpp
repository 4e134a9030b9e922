#include "pearl/optim.hpp"

#include <cmath>

namespace pearl {

void Optimizer::step(ParameterSet& params, const GradientMap& grads) {
  ++step_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (const auto& [name, g] : grads) {
    if (!params.contains(name) || !params.trainable(name)) continue;
    Tensor& theta = params.at(name);
    if (g.rows() != theta.rows() || g.cols() != theta.cols())
      throw UsageError("gradient shape mismatch for " + name);
    if (!all_finite(g)) throw TrainingError("non-finite gradient for parameter " + name);
    auto [mi, m_new] = m_.try_emplace(name, Tensor::Zero(theta.rows(), theta.cols()));
    auto [vi, v_new] = v_.try_emplace(name, Tensor::Zero(theta.rows(), theta.cols()));
    Tensor& m = mi->second;
    Tensor& v = vi->second;
    m = config_.beta1 * m + (1.0 - config_.beta1) * g;
    v = config_.beta2 * v.array().matrix() + (1.0 - config_.beta2) * g.array().square().matrix();
    // Decoupled weight decay, applied before the adaptive update.
    if (config_.weight_decay != 0.0) theta *= (1.0 - config_.lr * config_.weight_decay);
    theta.array() -=
        config_.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + config_.eps);
  }
}

void soft_update(ParameterSet& target, const ParameterSet& online, double tau) {
  if (tau < 0.0 || tau > 1.0) throw UsageError("soft_update: tau must be in [0, 1]");
  if (target.names().size() != online.names().size())
    throw UsageError("soft_update: parameter sets differ");
  for (const auto& name : target.names()) {
    if (!online.contains(name)) throw UsageError("soft_update: missing parameter " + name);
    Tensor& t = target.at(name);
    const Tensor& o = online.at(name);
    if (t.rows() != o.rows() || t.cols() != o.cols())
      throw UsageError("soft_update: shape mismatch for " + name);
    t = tau * o + (1.0 - tau) * t;
  }
}

}  // namespace pearl
