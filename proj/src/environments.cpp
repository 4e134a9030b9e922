#include "pearl/environments.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace pearl {
namespace {

void require_live(bool live) {
  if (!live) throw ContractError("env.step called before reset (or after a terminal step)");
}

long discrete_action(const Action& action, long num_actions,
                     const std::vector<std::uint8_t>& available) {
  if (!action.discrete() || action.index >= num_actions)
    throw ContractError("action index out of range for this environment");
  if (!available.empty() && !available[static_cast<std::size_t>(action.index)])
    throw ContractError("action is not available at this step");
  return action.index;
}

DiscreteActionSpace two_actions() { return DiscreteActionSpace::indexed(2); }

}  // namespace

// ---------------------------------------------------------------------------
// CartPole

std::pair<Vector, ActionSpace> CartPoleEnv::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  std::uniform_real_distribution<double> init(-0.05, 0.05);
  for (long i = 0; i < 4; ++i) state_(i) = init(rng_);
  steps_ = 0;
  live_ = true;
  return {state_, two_actions()};
}

ActionResult CartPoleEnv::step(const Action& action) {
  require_live(live_);
  const long a = discrete_action(action, 2, {});
  const double force = a == 1 ? kForce : -kForce;
  const double x = state_(0), x_dot = state_(1), theta = state_(2), theta_dot = state_(3);
  const double cos_t = std::cos(theta), sin_t = std::sin(theta);
  const double total_mass = kCartMass + kPoleMass;
  const double pole_mass_length = kPoleMass * kHalfLength;

  const double temp = (force + pole_mass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc = (kGravity * sin_t - cos_t * temp) /
                           (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;

  state_(0) = x + kDt * x_dot;
  state_(1) = x_dot + kDt * x_acc;
  state_(2) = theta + kDt * theta_dot;
  state_(3) = theta_dot + kDt * theta_acc;
  ++steps_;

  ActionResult result;
  result.observation = state_;
  result.reward = 1.0;
  result.terminated = std::abs(state_(0)) > kXLimit || std::abs(state_(2)) > kThetaLimit;
  result.truncated = !result.terminated && steps_ >= kStepLimit;
  if (result.done()) live_ = false;
  return result;
}

// ---------------------------------------------------------------------------
// Partially observable CartPole

Vector PartiallyObservableCartPole::emit() const {
  Vector obs = Vector::Zero(2);
  if (interactions_ % kEmissionPeriod == 0) {
    obs(0) = inner_.state()(0);  // x
    obs(1) = inner_.state()(2);  // theta
  }
  return obs;
}

std::pair<Vector, ActionSpace> PartiallyObservableCartPole::reset(
    std::optional<std::uint64_t> seed) {
  auto [obs, space] = inner_.reset(seed);
  (void)obs;
  interactions_ = 0;
  return {emit(), space};
}

ActionResult PartiallyObservableCartPole::step(const Action& action) {
  ActionResult result = inner_.step(action);
  ++interactions_;
  result.observation = emit();
  return result;
}

// ---------------------------------------------------------------------------
// Dynamic action wrapper

DynamicActionWrapper::DynamicActionWrapper(std::unique_ptr<Environment> inner, long deleted_index)
    : inner_(std::move(inner)), deleted_index_(deleted_index) {
  if (!inner_) throw UsageError("DynamicActionWrapper requires an inner environment");
}

DiscreteActionSpace DynamicActionWrapper::masked(const DiscreteActionSpace& space,
                                                 bool deleted) const {
  DiscreteActionSpace out = space;
  if (deleted && deleted_index_ >= 0 && deleted_index_ < out.size()) {
    out.available[static_cast<std::size_t>(deleted_index_)] = 0;
    if (out.available_count() == 0)
      throw ContractError("dynamic action deletion emptied the action space");
  }
  return out;
}

std::pair<Vector, ActionSpace> DynamicActionWrapper::reset(std::optional<std::uint64_t> seed) {
  auto [obs, space] = inner_->reset(seed);
  steps_ = 0;
  return {obs, masked(as_discrete(space), false)};
}

ActionResult DynamicActionWrapper::step(const Action& action) {
  ActionResult result = inner_->step(action);
  ++steps_;
  DiscreteActionSpace space =
      result.available_action_space ? *result.available_action_space
                                    : DiscreteActionSpace::indexed(2);
  result.available_action_space = masked(space, steps_ % kPeriod == 0);
  return result;
}

// ---------------------------------------------------------------------------
// DeepSea

DeepSeaEnv::DeepSeaEnv(long n) : n_(n), flips_(static_cast<std::size_t>(n), 0) {
  if (n < 2) throw ConfigError("deep_sea requires n >= 2");
}

Vector DeepSeaEnv::encode() const {
  Vector obs = Vector::Zero(n_ * n_);
  // A left move from column 0 leaves the reachable diagonal for good; such
  // doomed columns are clamped to 0 for the observation only.
  obs(row_ * n_ + std::max(col_, 0L)) = 1.0;
  return obs;
}

std::pair<Vector, ActionSpace> DeepSeaEnv::reset(std::optional<std::uint64_t> seed) {
  if (seed && !flips_fixed_) {
    Rng rng(*seed);
    std::bernoulli_distribution coin(0.5);
    for (auto& f : flips_) f = coin(rng) ? 1 : 0;
    flips_fixed_ = true;
  }
  row_ = 0;
  col_ = 0;
  live_ = true;
  return {encode(), two_actions()};
}

ActionResult DeepSeaEnv::step(const Action& action) {
  require_live(live_);
  const long a = discrete_action(action, 2, {});
  const bool right = (a ^ flips_[static_cast<std::size_t>(std::max(col_, 0L))]) != 0;

  double reward = 0.0;
  if (right) {
    reward -= 0.01 / static_cast<double>(n_);
    col_ = std::min(col_ + 1, n_ - 1);
  } else {
    --col_;  // no clamp: leaving column 0 makes the target unreachable
  }
  ++row_;

  ActionResult result;
  result.terminated = row_ >= n_;
  if (result.terminated) {
    row_ = n_ - 1;  // clamp for the terminal observation
    if (col_ == n_ - 1) reward += 1.0;
    live_ = false;
  }
  result.observation = encode();
  result.reward = reward;
  return result;
}

// ---------------------------------------------------------------------------
// Mean-variance bandit

std::pair<Vector, ActionSpace> MeanVarianceBanditEnv::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  live_ = true;
  return {Vector::Zero(1), two_actions()};
}

ActionResult MeanVarianceBanditEnv::step(const Action& action) {
  require_live(live_);
  const long a = discrete_action(action, 2, {});
  std::normal_distribution<double> draw(a == 0 ? kMean0 : kMean1, a == 0 ? kStd0 : kStd1);

  ActionResult result;
  result.observation = Vector::Zero(1);
  result.reward = draw(rng_);
  result.terminated = true;
  live_ = false;
  return result;
}

// ---------------------------------------------------------------------------
// Point mass

PointMassEnv::PointMassEnv(long dim, long horizon, double dt)
    : dim_(dim), horizon_(horizon), dt_(dt), state_(Vector::Zero(dim)) {
  if (dim < 1 || dim > 2) throw ConfigError("point_mass supports dim 1 or 2");
  if (horizon < 1) throw ConfigError("point_mass horizon must be >= 1");
}

std::pair<Vector, ActionSpace> PointMassEnv::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  std::uniform_real_distribution<double> init(-1.0, 1.0);
  for (long i = 0; i < dim_; ++i) state_(i) = init(rng_);
  steps_ = 0;
  live_ = true;
  return {state_, BoxActionSpace(Vector::Constant(dim_, -1.0), Vector::Constant(dim_, 1.0))};
}

ActionResult PointMassEnv::step(const Action& action) {
  require_live(live_);
  if (action.repr.size() != dim_)
    throw ContractError("point_mass action dimension mismatch");
  for (long i = 0; i < dim_; ++i)
    if (action.repr(i) < -1.0 - 1e-12 || action.repr(i) > 1.0 + 1e-12)
      throw ContractError("point_mass action outside [-1, 1]");

  state_ = (state_ + dt_ * action.repr).cwiseMax(-1.0).cwiseMin(1.0);
  ++steps_;

  ActionResult result;
  result.observation = state_;
  result.reward = -state_.squaredNorm();
  result.cost = action.repr.squaredNorm();
  result.truncated = steps_ >= horizon_;
  if (result.done()) live_ = false;
  return result;
}

// ---------------------------------------------------------------------------
// Supervised-to-bandit

SupervisedBanditEnv::SupervisedBanditEnv(SupervisedDataset data, double reward_sigma)
    : data_(std::move(data)), sigma_(reward_sigma) {
  if (data_.features.rows() < 1 || data_.labels.size() != static_cast<std::size_t>(data_.features.rows()))
    throw ConfigError("supervised_bandit requires a nonempty dataset with one label per row");
  if (sigma_ < 0.0) throw ConfigError("supervised_bandit reward sigma must be >= 0");
}

std::pair<Vector, ActionSpace> SupervisedBanditEnv::reset(std::optional<std::uint64_t> seed) {
  if (seed) rng_.seed(*seed);
  std::uniform_int_distribution<long> pick(0, data_.features.rows() - 1);
  current_row_ = pick(rng_);
  live_ = true;
  const long num_labels = static_cast<long>(data_.label_names.size());
  return {data_.features.row(current_row_).transpose(), DiscreteActionSpace::indexed(num_labels)};
}

ActionResult SupervisedBanditEnv::step(const Action& action) {
  require_live(live_);
  const long num_labels = static_cast<long>(data_.label_names.size());
  const long a = discrete_action(action, num_labels, {});

  ActionResult result;
  result.observation = data_.features.row(current_row_).transpose();
  result.reward = supervised_to_bandit_reward(data_.labels[static_cast<std::size_t>(current_row_)],
                                              a, sigma_, rng_);
  result.terminated = true;
  live_ = false;
  return result;
}

// ---------------------------------------------------------------------------
// Registry

namespace {

double get_double(const EnvParams& p, const std::string& key, double dflt) {
  auto it = p.find(key);
  if (it == p.end()) return dflt;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw ConfigError("environment parameter '" + key + "' is not a number: " + it->second);
  }
}

long get_long(const EnvParams& p, const std::string& key, long dflt) {
  const double v = get_double(p, key, static_cast<double>(dflt));
  return static_cast<long>(v);
}

std::string get_string(const EnvParams& p, const std::string& key, const std::string& dflt) {
  auto it = p.find(key);
  return it == p.end() ? dflt : it->second;
}

}  // namespace

std::unique_ptr<Environment> make_env(const std::string& name, const EnvParams& params) {
  if (name == "cartpole") return std::make_unique<CartPoleEnv>();
  if (name == "po_cartpole") return std::make_unique<PartiallyObservableCartPole>();
  if (name == "dynamic_cartpole")
    return std::make_unique<DynamicActionWrapper>(std::make_unique<CartPoleEnv>(),
                                                  get_long(params, "deleted_index", 1));
  if (name == "deep_sea") return std::make_unique<DeepSeaEnv>(get_long(params, "n", 10));
  if (name == "mean_variance_bandit") return std::make_unique<MeanVarianceBanditEnv>();
  if (name == "point_mass")
    return std::make_unique<PointMassEnv>(get_long(params, "dim", 1),
                                          get_long(params, "horizon", 100),
                                          get_double(params, "dt", 0.1));
  if (name == "supervised_bandit") {
    const std::string path = get_string(params, "csv", "");
    if (path.empty()) throw ConfigError("supervised_bandit requires a 'csv' parameter");
    SupervisedDataset data =
        load_supervised_csv(path, get_string(params, "label_column", "label"));
    return std::make_unique<SupervisedBanditEnv>(std::move(data),
                                                 get_double(params, "reward_sigma", 0.0));
  }
  throw ConfigError(
      "unknown environment '" + name +
      "'; registry: cartpole, po_cartpole, dynamic_cartpole, deep_sea, "
      "mean_variance_bandit, point_mass, supervised_bandit");
}

}  // namespace pearl
