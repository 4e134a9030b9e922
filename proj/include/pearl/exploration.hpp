#pragma once

#include <optional>

#include "pearl/action_space.hpp"

namespace pearl {

enum class ExplorationKind {
  EGreedy,
  Boltzmann,
  Propensity,
  Gaussian,
  Ucb,
  Thompson,
  SquareCb,
  DeepExploration,
};

// What a policy learner hands to its exploration module: per-action score
// estimates plus whatever extras the strategy needs.
struct ScoringContext {
  Vector means;                        // per-action value/reward estimates
  std::optional<Vector> bonuses;       // uncertainty bonuses (UCB/TS)
  std::optional<Vector> distribution;  // learner's action distribution
  std::vector<std::uint8_t> mask;      // availability, length == means.size()

  long action_count() const { return means.size(); }
};

// Pure selection rules; the caller owns the RNG stream.
long masked_argmax(const Vector& scores, const std::vector<std::uint8_t>& mask);
double ucb_score(double mean, double bonus, double beta);
double thompson_sample(double mean, double stddev, Rng& rng);
Vector squarecb_probabilities(const Vector& scores, const std::vector<std::uint8_t>& mask,
                              double gamma);
Vector gaussian_perturb(const Vector& action, double sigma, const BoxActionSpace& space,
                        Rng& rng);

struct ExplorationConfig {
  ExplorationKind kind = ExplorationKind::EGreedy;
  double epsilon = 0.1;        // e-greedy
  double temperature = 1.0;    // boltzmann
  double sigma = 0.1;          // gaussian
  double beta = 0.25;          // ucb
  double squarecb_gamma = 1.0;
  // Thompson: the paper words the per-action spread as a variance; the
  // literal reading (variance := bonus) is the default.
  bool thompson_bonus_is_stddev = false;
  long ensemble_size = 1;  // deep exploration
};

class ExplorationModule {
 public:
  explicit ExplorationModule(ExplorationConfig config) : config_(config) {
    if (config.epsilon < 0 || config.epsilon > 1) throw ConfigError("epsilon must be in [0,1]");
    if (config.temperature <= 0) throw ConfigError("temperature must be positive");
    if (config.sigma < 0) throw ConfigError("sigma must be >= 0");
    if (config.beta < 0) throw ConfigError("beta must be >= 0");
    if (config.squarecb_gamma <= 0) throw ConfigError("squarecb gamma must be positive");
  }

  const ExplorationConfig& config() const { return config_; }
  ExplorationKind kind() const { return config_.kind; }

  long explore_discrete(const ScoringContext& ctx, Rng& rng) const;
  Vector explore_continuous(const Vector& action, const BoxActionSpace& space, Rng& rng) const;

  // Deep exploration resamples its ensemble index at episode starts and
  // stays greedy w.r.t. that member within the episode.
  void resample_episode_index(Rng& rng);
  long episode_index() const { return episode_index_; }

 private:
  ExplorationConfig config_;
  long episode_index_ = 0;
};

}  // namespace pearl
