#include "pearl/runner.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace pearl {
namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << contents;
}

}  // namespace

std::vector<double> smooth_returns(const std::vector<EpisodeRecord>& episodes,
                                   const std::vector<long>& eval_steps, long window) {
  if (window < 1) throw ConfigError("smoothing window must be >= 1");
  std::vector<double> out;
  out.reserve(eval_steps.size());
  std::size_t lo = 0, hi = 0;
  for (long t : eval_steps) {
    while (hi < episodes.size() && episodes[hi].step <= t) ++hi;
    while (lo < hi && episodes[lo].step <= t - window) ++lo;
    if (lo == hi) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) sum += episodes[i].episodic_return;
    out.push_back(sum / static_cast<double>(hi - lo));
  }
  return out;
}

SeedRun run_seed(const ExperimentConfig& config, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  try {
    auto env = build_env(config);
    auto agent = build_agent(config, seed);
    const long max_steps = config.max_steps();
    const bool learn_after_episode = config.learn_after_episode();

    auto [observation, space] = env->reset(seed);
    agent->reset(observation, space);
    double episodic_return = 0.0;
    long episode = 0;
    for (long step = 1; step <= max_steps; ++step) {
      const Action action = agent->act();
      const ActionResult result = env->step(action);
      episodic_return += result.reward;
      agent->observe(result);
      if (!learn_after_episode) agent->learn();
      if (result.done()) {
        if (learn_after_episode) agent->learn();
        run.episodes.push_back({step, episode, episodic_return});
        ++episode;
        episodic_return = 0.0;
        auto [next_observation, next_space] = env->reset();
        agent->reset(next_observation, next_space);
      }
    }
  } catch (const std::exception& e) {
    run.failed = true;
    run.error = e.what();
  }
  return run;
}

bool RunResult::all_failed() const {
  for (const auto& s : seeds)
    if (!s.failed) return false;
  return true;
}

RunResult run_experiment(const ExperimentConfig& config) {
  // Config-level problems surface before any compute.
  {
    auto violations = preflight(config);
    if (!violations.empty()) {
      std::string joined;
      for (const auto& v : violations) joined += (joined.empty() ? "" : "; ") + v;
      throw ConfigError(joined);
    }
  }

  RunResult result;
  result.directory = config.output_dir();
  std::filesystem::create_directories(result.directory);
  write_file(result.directory / "config.txt", config.text);

  const long eval_every = config.eval_every();
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  for (long t = eval_every; t <= config.max_steps(); t += eval_every)
    result.eval_steps.push_back(t);

  std::string failures;
  for (std::uint64_t seed : config.seed_values()) {
    SeedRun run = run_seed(config, seed);

    std::string csv = "step,episode,episodic_return\n";
    for (const auto& e : run.episodes)
      csv += std::to_string(e.step) + "," + std::to_string(e.episode) + "," +
             fmt(e.episodic_return) + "\n";
    write_file(result.directory / ("seed_" + std::to_string(seed) + ".csv"), csv);
    if (run.failed)
      failures += "seed " + std::to_string(seed) + ": " + run.error + "\n";
    result.seeds.push_back(std::move(run));
  }
  if (!failures.empty()) write_file(result.directory / "failures.txt", failures);

  // Aggregate over non-failed seeds; a row is emitted only where every such
  // seed has a smoothed value.
  std::vector<const SeedRun*> ok;
  for (const auto& s : result.seeds)
    if (!s.failed) ok.push_back(&s);
  const long window = config.smoothing_window();
  std::vector<std::vector<double>> smoothed;
  for (const auto* s : ok)
    smoothed.push_back(smooth_returns(s->episodes, result.eval_steps, window));

  std::string agg_csv = "step,mean_return,stderr\n";
  for (std::size_t i = 0; i < result.eval_steps.size(); ++i) {
    if (ok.empty()) break;
    bool complete = true;
    for (const auto& series : smoothed)
      if (std::isnan(series[i])) complete = false;
    if (!complete) continue;
    const auto n = static_cast<double>(ok.size());
    double mean = 0.0;
    for (const auto& series : smoothed) mean += series[i];
    mean /= n;
    double var = 0.0;
    if (ok.size() > 1) {
      for (const auto& series : smoothed) var += (series[i] - mean) * (series[i] - mean);
      var /= (n - 1.0);
    }
    const double std_error = std::sqrt(var) / std::sqrt(n);
    result.aggregate.push_back({result.eval_steps[i], mean, std_error});
    agg_csv += std::to_string(result.eval_steps[i]) + "," + fmt(mean) + "," + fmt(std_error) +
               "\n";
  }
  write_file(result.directory / "aggregate.csv", agg_csv);
  return result;
}

}  // namespace pearl
