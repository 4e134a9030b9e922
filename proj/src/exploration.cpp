#include "pearl/exploration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pearl {
namespace {

std::vector<long> available_of(const std::vector<std::uint8_t>& mask) {
  std::vector<long> out;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[i]) out.push_back(static_cast<long>(i));
  if (out.empty()) throw UsageError("no available actions");
  return out;
}

long sample_categorical(const Vector& probs, const std::vector<long>& avail, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double acc = 0.0;
  for (long a : avail) {
    acc += probs(a);
    if (u < acc) return a;
  }
  return avail.back();
}

}  // namespace

long masked_argmax(const Vector& scores, const std::vector<std::uint8_t>& mask) {
  if (static_cast<std::size_t>(scores.size()) != mask.size())
    throw DimensionError("scores/mask length mismatch");
  long best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (long a = 0; a < scores.size(); ++a) {
    if (!mask[static_cast<std::size_t>(a)]) continue;
    if (best < 0 || scores(a) > best_score) {
      best = a;
      best_score = scores(a);
    }
  }
  if (best < 0) throw UsageError("no available actions");
  return best;
}

double ucb_score(double mean, double bonus, double beta) { return mean + beta * bonus; }

double thompson_sample(double mean, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(mean, stddev);
  return normal(rng);
}

Vector squarecb_probabilities(const Vector& scores, const std::vector<std::uint8_t>& mask,
                              double gamma) {
  const auto avail = available_of(mask);
  const long n_avail = static_cast<long>(avail.size());
  const long best = masked_argmax(scores, mask);
  Vector probs = Vector::Zero(scores.size());
  double mass = 0.0;
  for (long a : avail) {
    if (a == best) continue;
    probs(a) = 1.0 / (static_cast<double>(n_avail) + gamma * (scores(best) - scores(a)));
    mass += probs(a);
  }
  probs(best) = 1.0 - mass;
  return probs;
}

Vector gaussian_perturb(const Vector& action, double sigma, const BoxActionSpace& space,
                        Rng& rng) {
  if (action.size() != space.low.size()) throw DimensionError("action/space dim mismatch");
  std::normal_distribution<double> normal(0.0, sigma);
  Vector out = action;
  for (long i = 0; i < out.size(); ++i) {
    out(i) += sigma > 0 ? normal(rng) : 0.0;
    out(i) = std::clamp(out(i), space.low(i), space.high(i));
  }
  return out;
}

long ExplorationModule::explore_discrete(const ScoringContext& ctx, Rng& rng) const {
  if (static_cast<std::size_t>(ctx.means.size()) != ctx.mask.size())
    throw DimensionError("scoring context mask length mismatch");
  const auto avail = available_of(ctx.mask);
  switch (config_.kind) {
    case ExplorationKind::EGreedy: {
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      if (unif(rng) < config_.epsilon) {
        std::uniform_int_distribution<std::size_t> pick(0, avail.size() - 1);
        return avail[pick(rng)];
      }
      return masked_argmax(ctx.means, ctx.mask);
    }
    case ExplorationKind::Boltzmann: {
      double max_score = -std::numeric_limits<double>::infinity();
      for (long a : avail) max_score = std::max(max_score, ctx.means(a));
      Vector probs = Vector::Zero(ctx.means.size());
      double z = 0.0;
      for (long a : avail) {
        probs(a) = std::exp((ctx.means(a) - max_score) / config_.temperature);
        z += probs(a);
      }
      probs /= z;
      return sample_categorical(probs, avail, rng);
    }
    case ExplorationKind::Propensity: {
      if (!ctx.distribution) throw UsageError("propensity exploration needs a distribution");
      Vector probs = *ctx.distribution;
      double z = 0.0;
      for (long a : avail) z += probs(a);
      if (z <= 0) throw UsageError("propensity distribution has no mass on available actions");
      probs /= z;
      return sample_categorical(probs, avail, rng);
    }
    case ExplorationKind::Ucb: {
      if (!ctx.bonuses) throw UsageError("ucb exploration needs bonuses");
      Vector scores = ctx.means;
      for (long a = 0; a < scores.size(); ++a)
        scores(a) = ucb_score(ctx.means(a), (*ctx.bonuses)(a), config_.beta);
      return masked_argmax(scores, ctx.mask);
    }
    case ExplorationKind::Thompson: {
      if (!ctx.bonuses) throw UsageError("thompson exploration needs bonuses");
      Vector scores = ctx.means;
      for (long a = 0; a < scores.size(); ++a) {
        const double bonus = (*ctx.bonuses)(a);
        const double stddev =
            config_.thompson_bonus_is_stddev ? bonus : std::sqrt(std::max(0.0, bonus));
        scores(a) = thompson_sample(ctx.means(a), stddev, rng);
      }
      return masked_argmax(scores, ctx.mask);
    }
    case ExplorationKind::SquareCb: {
      const Vector probs = squarecb_probabilities(ctx.means, ctx.mask, config_.squarecb_gamma);
      return sample_categorical(probs, avail, rng);
    }
    case ExplorationKind::DeepExploration:
      // The learner scores with ensemble member `episode_index()`; act greedily.
      return masked_argmax(ctx.means, ctx.mask);
    case ExplorationKind::Gaussian:
      throw IncompatibleModulesError("gaussian exploration is continuous-only");
  }
  throw UsageError("unknown exploration kind");
}

Vector ExplorationModule::explore_continuous(const Vector& action, const BoxActionSpace& space,
                                             Rng& rng) const {
  if (config_.kind != ExplorationKind::Gaussian)
    throw IncompatibleModulesError("continuous exploration requires the gaussian module");
  return gaussian_perturb(action, config_.sigma, space, rng);
}

void ExplorationModule::resample_episode_index(Rng& rng) {
  if (config_.ensemble_size <= 0) throw ConfigError("ensemble_size must be positive");
  std::uniform_int_distribution<long> pick(0, config_.ensemble_size - 1);
  episode_index_ = pick(rng);
}

}  // namespace pearl
