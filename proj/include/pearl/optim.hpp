#pragma once

#include <map>
#include <string>

#include "pearl/tensor.hpp"

namespace pearl {

enum class OptimizerKind { Adam, AdamW };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::AdamW;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // ignored for plain Adam
};

// Adam / AdamW with decoupled weight decay. Moment buffers are created
// lazily, shape-matched to their parameters.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config) : config_(config) {
    if (config_.kind == OptimizerKind::Adam) config_.weight_decay = 0.0;
  }

  void step(ParameterSet& params, const GradientMap& grads);

  long step_count() const { return step_; }
  const OptimizerConfig& config() const { return config_; }
  double& lr() { return config_.lr; }

 private:
  OptimizerConfig config_;
  long step_ = 0;
  std::map<std::string, Tensor> m_;
  std::map<std::string, Tensor> v_;
};

// target <- tau * online + (1 - tau) * target, per parameter.
void soft_update(ParameterSet& target, const ParameterSet& online, double tau);

}  // namespace pearl
