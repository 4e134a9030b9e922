#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "pearl/action_space.hpp"
#include "pearl/bandits.hpp"
#include "pearl/tensor.hpp"
#include "pearl/transition.hpp"

namespace pearl {

// Gym-style environment contract. `reset` seeds the internal RNG stream when
// a seed is supplied (typically on the first call of a run); later calls
// continue the stream so episodes differ while the whole run stays
// deterministic. `step` with an unavailable action, or after a terminal
// result without an intervening reset, raises ContractError.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::pair<Vector, ActionSpace> reset(
      std::optional<std::uint64_t> seed = std::nullopt) = 0;
  virtual ActionResult step(const Action& action) = 0;

  virtual long observation_dim() const = 0;
  virtual bool has_cost() const { return false; }
};

// Classic CartPole-v1: Euler-integrated cart-pole dynamics, reward 1 per
// step, terminates when |x| > 2.4 or |theta| > 12 degrees, truncates at 500
// steps. Initial state uniform(-0.05, 0.05)^4.
class CartPoleEnv : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kDt = 0.02;
  static constexpr double kXLimit = 2.4;
  static constexpr double kThetaLimit = 12.0 * M_PI / 180.0;
  static constexpr long kStepLimit = 500;

  std::pair<Vector, ActionSpace> reset(
      std::optional<std::uint64_t> seed = std::nullopt) override;
  ActionResult step(const Action& action) override;
  long observation_dim() const override { return 4; }

  const Vector& state() const { return state_; }
  long steps() const { return steps_; }

 private:
  Vector state_{Vector::Zero(4)};
  Rng rng_{0};
  long steps_ = 0;
  bool live_ = false;
};

// Partially observable CartPole: observation is (x, theta) on emission steps
// (every 2nd interaction, counting the reset observation as emitted) and the
// zero vector otherwise. Reward and termination are unaffected.
class PartiallyObservableCartPole : public Environment {
 public:
  static constexpr long kEmissionPeriod = 2;

  std::pair<Vector, ActionSpace> reset(
      std::optional<std::uint64_t> seed = std::nullopt) override;
  ActionResult step(const Action& action) override;
  long observation_dim() const override { return 2; }

 private:
  Vector emit() const;

  CartPoleEnv inner_;
  long interactions_ = 0;
};

// Deletes one action from a wrapped discrete environment's space at every
// 4th step: the available space attached to steps 4, 8, 12, ... excludes
// `deleted_index`; all other steps (and reset) expose the full space.
class DynamicActionWrapper : public Environment {
 public:
  static constexpr long kPeriod = 4;

  DynamicActionWrapper(std::unique_ptr<Environment> inner, long deleted_index = 1);

  std::pair<Vector, ActionSpace> reset(
      std::optional<std::uint64_t> seed = std::nullopt) override;
  ActionResult step(const Action& action) override;
  long observation_dim() const override { return inner_->observation_dim(); }
  bool has_cost() const override { return inner_->has_cost(); }

 private:
  DiscreteActionSpace masked(const DiscreteActionSpace& space, bool deleted) const;

  std::unique_ptr<Environment> inner_;
  long deleted_index_;
  long steps_ = 0;
};

// DeepSea (n x n, deterministic): the agent starts top-left and descends one
// row per step; per-column flip bits decide which of the two actions means
// "right". Each right move costs 0.01/n; reaching the bottom-right cell on
// the final step pays +1, so the optimal return is 0.99. Observation is a
// one-hot over the n^2 cells. Flip bits are sampled once from the first
// supplied seed and kept across episodes.
class DeepSeaEnv : public Environment {
 public:
  explicit DeepSeaEnv(long n);

  std::pair<Vector, ActionSpace> reset(
      std::optional<std::uint64_t> seed = std::nullopt) override;
  ActionResult step(const Action& action) override;
  long observation_dim() const override { return n_ * n_; }

  const std::vector<std::uint8_t>& flips() const { return flips_; }

 private:
  Vector encode() const;

  long n_;
  std::vector<std::uint8_t> flips_;
  bool flips_fixed_ = false;
  long row_ = 0, col_ = 0;
  bool live_ = false;
};

// Single-state two-armed bandit: arm 0 ~ N(6, 1), arm 1 ~ N(10, 9).
// Every episode is one step.
class MeanVarianceBanditEnv : public Environment {
 public:
  static constexpr double kMean0 = 6.0, kStd0 = 1.0;
  static constexpr double kMean1 = 10.0, kStd1 = 3.0;

  std::pair<Vector, ActionSpace> reset(
      std::optional<std::uint64_t> seed = std::nullopt) override;
  ActionResult step(const Action& action) override;
  long observation_dim() const override { return 1; }

 private:
  Rng rng_{0};
  bool live_ = false;
};

// Continuous toy: state and action both live in [-1, 1]^d. The state moves
// by dt * action (clipped to the box), the reward is the negative squared
// distance to the origin, and every step carries cost ||a||^2 exactly.
// Episodes truncate after `horizon` steps.
class PointMassEnv : public Environment {
 public:
  explicit PointMassEnv(long dim = 1, long horizon = 100, double dt = 0.1);

  std::pair<Vector, ActionSpace> reset(
      std::optional<std::uint64_t> seed = std::nullopt) override;
  ActionResult step(const Action& action) override;
  long observation_dim() const override { return dim_; }
  bool has_cost() const override { return true; }

 private:
  long dim_, horizon_;
  double dt_;
  Vector state_;
  Rng rng_{0};
  long steps_ = 0;
  bool live_ = false;
};

// Supervised-to-bandit environment: each one-step episode presents the
// feature row of a uniformly drawn dataset example; the actions are the
// class labels and the reward is 1{action == label} plus N(0, sigma) noise.
class SupervisedBanditEnv : public Environment {
 public:
  SupervisedBanditEnv(SupervisedDataset data, double reward_sigma = 0.0);

  std::pair<Vector, ActionSpace> reset(
      std::optional<std::uint64_t> seed = std::nullopt) override;
  ActionResult step(const Action& action) override;
  long observation_dim() const override { return data_.features.cols(); }

  const SupervisedDataset& dataset() const { return data_; }

 private:
  SupervisedDataset data_;
  double sigma_;
  Rng rng_{0};
  long current_row_ = 0;
  bool live_ = false;
};

// String-keyed environment parameters, as parsed from an experiment config.
using EnvParams = std::map<std::string, std::string>;

// Registry: cartpole, po_cartpole, dynamic_cartpole, deep_sea,
// mean_variance_bandit, point_mass, supervised_bandit. Unknown names raise
// ConfigError listing the registry.
std::unique_ptr<Environment> make_env(const std::string& name, const EnvParams& params = {});

}  // namespace pearl
