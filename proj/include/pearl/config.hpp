#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "pearl/agent.hpp"

namespace pearl {

// Declarative experiment description: plain-text sections of key = value
// pairs ([experiment], [environment], [learner], [exploration], [history],
// [safety], [buffer], [action_representation], [dataset]). Unknown keys are
// kept verbatim; semantic validation happens when modules are built.
struct ExperimentConfig {
  using Section = std::map<std::string, std::string>;
  std::map<std::string, Section> sections;
  std::string text;  // original file contents, echoed into run directories

  bool has(const std::string& section, const std::string& key) const;
  std::string str(const std::string& section, const std::string& key,
                  const std::string& dflt) const;
  std::string require(const std::string& section, const std::string& key) const;
  double num(const std::string& section, const std::string& key, double dflt) const;
  long integer(const std::string& section, const std::string& key, long dflt) const;
  bool flag(const std::string& section, const std::string& key, bool dflt) const;
  std::vector<long> longs(const std::string& section, const std::string& key,
                          std::vector<long> dflt) const;

  long num_seeds() const { return integer("experiment", "seeds", 5); }
  // Explicit "seed_list = a,b,c" wins over base_seed + index.
  std::vector<std::uint64_t> seed_values() const;
  long max_steps() const { return integer("experiment", "max_steps", 100000); }
  long smoothing_window() const { return integer("experiment", "smoothing_window", 5000); }
  long eval_every() const { return integer("experiment", "eval_every", 1000); }
  bool learn_after_episode() const { return flag("experiment", "learn_after_episode", false); }
  std::filesystem::path output_dir() const;
  std::string env_name() const { return require("environment", "name"); }
  EnvParams env_params() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

std::unique_ptr<Environment> build_env(const ExperimentConfig& config);
std::unique_ptr<PearlAgent> build_agent(const ExperimentConfig& config, std::uint64_t seed);

// Every composition/config violation, not just the first; empty means ok.
std::vector<std::string> preflight(const ExperimentConfig& config);

}  // namespace pearl
