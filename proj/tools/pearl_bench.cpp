#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pearl/agent.hpp"
#include "pearl/config.hpp"
#include "pearl/environments.hpp"
#include "pearl/offline_rl.hpp"
#include "pearl/plot.hpp"
#include "pearl/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailure = 1;
constexpr int kExitConfigError = 2;

int cmd_run(const std::string& config_path) {
  const pearl::ExperimentConfig config = pearl::load_config(config_path);
  const pearl::RunResult result = pearl::run_experiment(config);
  std::printf("run directory: %s\n", result.directory.string().c_str());
  for (const auto& seed_run : result.seeds) {
    if (seed_run.failed)
      std::printf("seed %llu: FAILED (%s)\n",
                  static_cast<unsigned long long>(seed_run.seed), seed_run.error.c_str());
    else
      std::printf("seed %llu: %zu episodes\n",
                  static_cast<unsigned long long>(seed_run.seed), seed_run.episodes.size());
  }
  if (result.all_failed()) {
    std::fprintf(stderr, "error: all seeds failed\n");
    return kExitRunFailure;
  }
  return kExitOk;
}

int cmd_plot(const std::vector<std::string>& dirs) {
  std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
  const std::filesystem::path out = pearl::plot_run_directories(paths);
  std::printf("wrote %s\n", out.string().c_str());
  return kExitOk;
}

int cmd_dataset_gen(const std::string& config_path) {
  const pearl::ExperimentConfig config = pearl::load_config(config_path);
  if (!config.has("dataset", "path"))
    throw pearl::ConfigError("dataset-gen requires [dataset] path");
  const std::string path = config.require("dataset", "path");
  const long steps = config.integer("dataset", "steps", 100000);
  const bool learn = config.flag("dataset", "learn", true);
  const std::uint64_t seed = config.seed_values().front();

  auto env = pearl::build_env(config);
  auto agent = pearl::build_agent(config, seed);
  const pearl::DatasetMeta meta = pearl::generate_dataset(
      *env, *agent, steps, path, seed, config.env_name(),
      config.str("dataset", "behavior_policy", "online"), learn);
  std::printf("wrote %lld transitions to %s\n", static_cast<long long>(meta.size),
              path.c_str());
  return kExitOk;
}

int cmd_preflight(const std::string& config_path) {
  const pearl::ExperimentConfig config = pearl::load_config(config_path);
  const std::vector<std::string> violations = pearl::preflight(config);
  if (violations.empty()) {
    std::printf("preflight OK\n");
    return kExitOk;
  }
  for (const auto& v : violations) std::fprintf(stderr, "violation: %s\n", v.c_str());
  return kExitConfigError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pearl_bench: run, plot, and inspect benchmark experiments"};
  app.require_subcommand(1);

  std::string run_config, dataset_config, preflight_config;
  std::vector<std::string> plot_dirs;

  auto* run = app.add_subcommand("run", "Run an experiment from a config file");
  run->add_option("config", run_config, "experiment config file")->required();

  auto* plot = app.add_subcommand("plot", "Render plot.svg from run directories");
  plot->add_option("dirs", plot_dirs, "run directories containing aggregate.csv")->required();

  auto* dataset = app.add_subcommand("dataset-gen", "Generate an offline dataset");
  dataset->add_option("config", dataset_config, "dataset config file")->required();

  auto* preflight = app.add_subcommand("preflight", "Validate a config without running");
  preflight->add_option("config", preflight_config, "experiment config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_config);
    if (plot->parsed()) return cmd_plot(plot_dirs);
    if (dataset->parsed()) return cmd_dataset_gen(dataset_config);
    if (preflight->parsed()) return cmd_preflight(preflight_config);
  } catch (const pearl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRunFailure;
  }
  return kExitOk;
}
