#pragma once

#include "pearl/config.hpp"

namespace pearl {

struct EpisodeRecord {
  long step = 0;     // env-step index at which the episode finished
  long episode = 0;  // episode index (both axes can be rendered)
  double episodic_return = 0.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<EpisodeRecord> episodes;
  bool failed = false;
  std::string error;
};

struct AggregateRow {
  long step = 0;
  double mean_return = 0.0;
  double std_error = 0.0;  // sample stddev / sqrt(num seeds)
};

// Smoothed value at eval step t = mean of raw episodic returns completed in
// (t - window, t]; NaN when that window holds no completed episode.
std::vector<double> smooth_returns(const std::vector<EpisodeRecord>& episodes,
                                   const std::vector<long>& eval_steps, long window);

struct RunResult {
  std::filesystem::path directory;
  std::vector<long> eval_steps;
  std::vector<SeedRun> seeds;
  std::vector<AggregateRow> aggregate;

  bool all_failed() const;
};

// Runs one seed for the configured step budget (no files written).
SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed);

// Full pipeline: every seed, per-seed CSVs, aggregate CSV, and the config
// echoed into the run directory. Per-seed failures are recorded and the run
// continues; config errors propagate before any compute.
RunResult run_experiment(const ExperimentConfig& config);

}  // namespace pearl
