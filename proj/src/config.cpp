#include "pearl/config.hpp"

#include <fstream>
#include <sstream>

#include "pearl/actor_critic.hpp"
#include "pearl/offline_rl.hpp"
#include "pearl/value_learners.hpp"

namespace pearl {
namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream stream(s);
  std::string item;
  while (std::getline(stream, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing and typed access

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig config;
  config.text = text;
  std::stringstream stream(text);
  std::string line;
  std::string section;
  long line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const auto comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError("config line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      config.sections[section];  // a section may be empty
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside any [section]");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    config.sections[section][key] = value;
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

bool ExperimentConfig::has(const std::string& section, const std::string& key) const {
  auto s = sections.find(section);
  return s != sections.end() && s->second.count(key) != 0;
}

std::string ExperimentConfig::str(const std::string& section, const std::string& key,
                                  const std::string& dflt) const {
  auto s = sections.find(section);
  if (s == sections.end()) return dflt;
  auto k = s->second.find(key);
  return k == s->second.end() ? dflt : k->second;
}

std::string ExperimentConfig::require(const std::string& section, const std::string& key) const {
  if (!has(section, key))
    throw ConfigError("missing required config key [" + section + "] " + key);
  return str(section, key, "");
}

double ExperimentConfig::num(const std::string& section, const std::string& key,
                             double dflt) const {
  if (!has(section, key)) return dflt;
  const std::string v = str(section, key, "");
  try {
    std::size_t used = 0;
    const double parsed = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return parsed;
  } catch (const std::exception&) {
    throw ConfigError("config key [" + section + "] " + key + " is not a number: " + v);
  }
}

long ExperimentConfig::integer(const std::string& section, const std::string& key,
                               long dflt) const {
  return static_cast<long>(num(section, key, static_cast<double>(dflt)));
}

bool ExperimentConfig::flag(const std::string& section, const std::string& key, bool dflt) const {
  if (!has(section, key)) return dflt;
  const std::string v = str(section, key, "");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key [" + section + "] " + key + " is not a boolean: " + v);
}

std::vector<long> ExperimentConfig::longs(const std::string& section, const std::string& key,
                                          std::vector<long> dflt) const {
  if (!has(section, key)) return dflt;
  std::vector<long> out;
  for (const auto& token : split(str(section, key, ""), ',')) {
    if (token.empty()) continue;
    try {
      out.push_back(std::stol(token));
    } catch (const std::exception&) {
      throw ConfigError("config key [" + section + "] " + key + " has a non-integer entry: " +
                        token);
    }
  }
  return out;
}

std::vector<std::uint64_t> ExperimentConfig::seed_values() const {
  std::vector<std::uint64_t> out;
  if (has("experiment", "seed_list")) {
    for (long s : longs("experiment", "seed_list", {}))
      out.push_back(static_cast<std::uint64_t>(s));
    if (out.empty()) throw ConfigError("seed_list must not be empty");
    return out;
  }
  const long n = num_seeds();
  if (n < 1) throw ConfigError("seeds must be >= 1");
  const auto base = static_cast<std::uint64_t>(integer("experiment", "base_seed", 1000));
  for (long i = 0; i < n; ++i) out.push_back(base + static_cast<std::uint64_t>(i));
  return out;
}

std::filesystem::path ExperimentConfig::output_dir() const {
  std::string dir = str("experiment", "output_dir", "");
  if (dir.empty()) {
    const char* root = std::getenv("PEARL_OUTPUT_ROOT");
    dir = (root ? std::string(root) : std::string("runs")) + "/" +
          str("experiment", "name", "experiment");
  }
  return dir;
}

EnvParams ExperimentConfig::env_params() const {
  EnvParams out;
  auto s = sections.find("environment");
  if (s == sections.end()) return out;
  for (const auto& [key, value] : s->second)
    if (key != "name") out[key] = value;
  return out;
}

// ---------------------------------------------------------------------------
// Module factories

std::unique_ptr<Environment> build_env(const ExperimentConfig& config) {
  return make_env(config.env_name(), config.env_params());
}

namespace {

struct EnvShape {
  long obs_dim = 0;
  bool discrete = true;
  long num_slots = 0;
  DiscreteActionSpace discrete_space;
  BoxActionSpace box;
};

EnvShape probe_env(const ExperimentConfig& config) {
  auto env = build_env(config);
  EnvShape shape;
  shape.obs_dim = env->observation_dim();
  auto [obs, space] = env->reset(0);
  (void)obs;
  shape.discrete = is_discrete(space);
  if (shape.discrete) {
    shape.discrete_space = as_discrete(space);
    shape.num_slots = shape.discrete_space.size();
  } else {
    shape.box = as_box(space);
  }
  return shape;
}

ExplorationConfig build_exploration(const ExperimentConfig& c) {
  ExplorationConfig e;
  const std::string kind = c.str("exploration", "kind", "egreedy");
  if (kind == "egreedy") e.kind = ExplorationKind::EGreedy;
  else if (kind == "boltzmann") e.kind = ExplorationKind::Boltzmann;
  else if (kind == "propensity") e.kind = ExplorationKind::Propensity;
  else if (kind == "gaussian") e.kind = ExplorationKind::Gaussian;
  else if (kind == "ucb") e.kind = ExplorationKind::Ucb;
  else if (kind == "thompson") e.kind = ExplorationKind::Thompson;
  else if (kind == "squarecb") e.kind = ExplorationKind::SquareCb;
  else if (kind == "deep") e.kind = ExplorationKind::DeepExploration;
  else throw ConfigError("unknown exploration kind: " + kind);
  e.epsilon = c.num("exploration", "epsilon", e.epsilon);
  e.temperature = c.num("exploration", "temperature", e.temperature);
  e.sigma = c.num("exploration", "sigma", e.sigma);
  e.beta = c.num("exploration", "beta", e.beta);
  e.squarecb_gamma = c.num("exploration", "squarecb_gamma", e.squarecb_gamma);
  e.ensemble_size = c.integer("exploration", "ensemble_size", e.ensemble_size);
  return e;
}

std::unique_ptr<HistorySummarizer> build_summarizer(const ExperimentConfig& c, long obs_dim,
                                                    std::uint64_t seed) {
  const std::string kind = c.str("history", "kind", "identity");
  if (kind == "identity") return std::make_unique<IdentitySummarizer>(obs_dim);
  if (kind == "stacking")
    return std::make_unique<StackingSummarizer>(obs_dim, c.integer("history", "length", 4));
  if (kind == "lstm")
    return std::make_unique<LstmSummarizer>(obs_dim, c.integer("history", "hidden", 128),
                                            c.integer("history", "layers", 2),
                                            c.integer("history", "length", 4), seed ^ 0x5157ULL);
  throw ConfigError("unknown history kind: " + kind);
}

ActionRepresentationModule build_action_repr(const ExperimentConfig& c, const EnvShape& shape) {
  ActionRepresentationModule repr;
  const std::string kind = c.str("action_representation", "kind", "one_hot");
  if (kind == "identity") repr.kind = ActionReprKind::Identity;
  else if (kind == "one_hot") repr.kind = ActionReprKind::OneHot;
  else if (kind == "binary") repr.kind = ActionReprKind::Binary;
  else throw ConfigError("unknown action representation kind: " + kind);
  repr.max_actions = c.integer("action_representation", "max_actions", shape.num_slots);
  return repr;
}

QLearnerConfig build_q_config(const ExperimentConfig& c, long state_dim, long repr_dim,
                              long slots) {
  QLearnerConfig q;
  q.state_dim = state_dim;
  q.action_repr_dim = repr_dim;
  q.num_action_slots = slots;
  q.hidden_dims = c.longs("learner", "hidden", q.hidden_dims);
  q.lr = c.num("learner", "lr", q.lr);
  q.batch_size = c.integer("learner", "batch_size", q.batch_size);
  q.training_rounds = c.integer("learner", "training_rounds", q.training_rounds);
  q.target_update_period = c.integer("learner", "target_update_period", q.target_update_period);
  q.target_step_size = c.num("learner", "target_step_size", q.target_step_size);
  q.gamma = c.num("learner", "gamma", q.gamma);
  q.huber = c.flag("learner", "huber", q.huber);
  return q;
}

AcConfig build_ac_config(const ExperimentConfig& c, long state_dim, long repr_dim, long slots,
                         long action_dim) {
  AcConfig a;
  a.state_dim = state_dim;
  a.action_repr_dim = repr_dim;
  a.num_action_slots = slots;
  a.action_dim = action_dim;
  a.hidden_dims = c.longs("learner", "hidden", a.hidden_dims);
  a.actor_lr = c.num("learner", "actor_lr", a.actor_lr);
  a.critic_lr = c.num("learner", "critic_lr", a.critic_lr);
  a.batch_size = c.integer("learner", "batch_size", a.batch_size);
  a.training_rounds = c.integer("learner", "training_rounds", a.training_rounds);
  a.gamma = c.num("learner", "gamma", a.gamma);
  a.tau = c.num("learner", "tau", a.tau);
  a.entropy_coef = c.num("learner", "entropy_coef", a.entropy_coef);
  a.clip_low = c.num("learner", "clip_low", a.clip_low);
  a.clip_high = c.num("learner", "clip_high", a.clip_high);
  a.actor_delay = c.integer("learner", "actor_delay", a.actor_delay);
  a.smoothing_sigma = c.num("learner", "smoothing_sigma", a.smoothing_sigma);
  a.smoothing_clip = c.num("learner", "smoothing_clip", a.smoothing_clip);
  return a;
}

std::unique_ptr<PolicyLearner> build_learner(const ExperimentConfig& c, const EnvShape& shape,
                                             const ActionRepresentationModule& repr,
                                             long state_dim, std::uint64_t seed) {
  const std::string kind = c.require("learner", "kind");
  const ExplorationConfig expl = build_exploration(c);
  const long repr_dim = shape.discrete ? repr.dim(shape.discrete_space) : 0;

  if (kind == "dqn" || kind == "double_dqn" || kind == "dueling_dqn" || kind == "sarsa") {
    QLearnerConfig q = build_q_config(c, state_dim, repr_dim, shape.num_slots);
    if (kind == "double_dqn") q.variant = QVariant::DoubleDqn;
    else if (kind == "dueling_dqn") q.variant = QVariant::DuelingDqn;
    else if (kind == "sarsa") q.variant = QVariant::Sarsa;
    return std::make_unique<DeepQLearner>(q, expl, seed);
  }
  if (kind == "bootstrapped_dqn") {
    QLearnerConfig q = build_q_config(c, state_dim, repr_dim, shape.num_slots);
    return std::make_unique<BootstrappedQLearner>(q, c.integer("learner", "ensemble", 10),
                                                  c.num("learner", "mask_probability", 0.5),
                                                  seed);
  }
  if (kind == "qrdqn") {
    QrdqnConfig q;
    q.base = build_q_config(c, state_dim, repr_dim, shape.num_slots);
    q.num_quantiles = c.integer("learner", "quantiles", q.num_quantiles);
    q.kappa = c.num("learner", "kappa", q.kappa);
    return std::make_unique<QuantileQLearner>(q, expl, seed);
  }
  if (kind == "cql") {
    QLearnerConfig q = build_q_config(c, state_dim, repr_dim, shape.num_slots);
    return std::make_unique<CqlLearner>(q, c.num("learner", "cql_weight", 1.0), expl, seed);
  }
  if (kind == "reinforce" || kind == "ppo" || kind == "discrete_sac") {
    AcConfig a = build_ac_config(c, state_dim, repr_dim, shape.num_slots, 0);
    if (kind == "reinforce") return std::make_unique<ReinforceLearner>(a, expl, seed);
    if (kind == "ppo") return std::make_unique<PpoLearner>(a, expl, seed);
    return std::make_unique<DiscreteSacLearner>(a, expl, seed);
  }
  if (kind == "ddpg" || kind == "td3" || kind == "continuous_sac" || kind == "td3bc" ||
      kind == "iql") {
    if (shape.discrete)
      throw ConfigError("learner kind '" + kind + "' requires a continuous environment");
    AcConfig a = build_ac_config(c, state_dim, 0, 0, shape.box.dim());
    if (kind == "ddpg")
      return std::make_unique<DeterministicAcLearner>(a, DetAcVariant::Ddpg, shape.box, expl,
                                                      seed);
    if (kind == "td3")
      return std::make_unique<DeterministicAcLearner>(a, DetAcVariant::Td3, shape.box, expl,
                                                      seed);
    if (kind == "continuous_sac") return std::make_unique<ContinuousSacLearner>(a, shape.box, seed);
    if (kind == "td3bc")
      return std::make_unique<Td3BcLearner>(a, c.num("learner", "bc_weight", 2.5), shape.box,
                                            seed);
    IqlConfig iql;
    iql.state_dim = state_dim;
    iql.action_dim = shape.box.dim();
    iql.hidden_dims = c.longs("learner", "hidden", iql.hidden_dims);
    iql.actor_lr = c.num("learner", "actor_lr", iql.actor_lr);
    iql.critic_lr = c.num("learner", "critic_lr", iql.critic_lr);
    iql.value_lr = c.num("learner", "value_lr", iql.value_lr);
    iql.tau_soft = c.num("learner", "tau", iql.tau_soft);
    iql.gamma = c.num("learner", "gamma", iql.gamma);
    iql.expectile_tau = c.num("learner", "expectile_tau", iql.expectile_tau);
    iql.temperature = c.num("learner", "temperature", iql.temperature);
    iql.batch_size = c.integer("learner", "batch_size", iql.batch_size);
    iql.training_rounds = c.integer("learner", "training_rounds", iql.training_rounds);
    return std::make_unique<IqlLearner>(iql, shape.box, seed);
  }
  throw ConfigError("unknown learner kind: " + kind);
}

SafetyModule build_safety(const ExperimentConfig& c, const EnvShape& shape, long state_dim) {
  const std::string kind = c.str("safety", "kind", "none");
  if (kind == "none") return SafetyModule::none();
  if (kind == "mean_variance")
    return SafetyModule::mean_variance(c.num("safety", "beta", 1.0));
  if (kind == "reward_constrained") {
    const long action_dim = shape.discrete ? shape.num_slots : shape.box.dim();
    OptimizerConfig opt;
    opt.lr = c.num("safety", "critic_lr", 1e-3);
    auto critic = std::make_shared<CostCritic>(
        state_dim, action_dim, c.longs("safety", "hidden", {64, 64}), opt,
        c.num("safety", "gamma", 0.99), c.num("safety", "tau", 0.005));
    return SafetyModule::reward_constrained(c.num("safety", "alpha", 0.1),
                                            c.num("safety", "lambda_lr", 1e-2),
                                            std::move(critic));
  }
  throw ConfigError("unknown safety kind: " + kind);
}

}  // namespace

std::unique_ptr<PearlAgent> build_agent(const ExperimentConfig& config, std::uint64_t seed) {
  const EnvShape shape = probe_env(config);
  auto summarizer = build_summarizer(config, shape.obs_dim, seed);
  const long state_dim = summarizer->state_dim();
  const ActionRepresentationModule repr = build_action_repr(config, shape);
  auto learner = build_learner(config, shape, repr, state_dim, seed);
  SafetyModule safety = build_safety(config, shape, state_dim);
  const auto capacity =
      static_cast<std::size_t>(config.integer("buffer", "capacity", 10000));
  return std::make_unique<PearlAgent>(std::move(learner), std::move(summarizer),
                                      std::move(safety), repr, capacity, seed);
}

std::vector<std::string> preflight(const ExperimentConfig& config) {
  std::vector<std::string> violations;

  EnvShape shape;
  bool have_env = false;
  try {
    shape = probe_env(config);
    have_env = true;
  } catch (const std::runtime_error& e) {
    violations.push_back(e.what());
  }
  if (!have_env) return violations;

  std::unique_ptr<HistorySummarizer> summarizer;
  std::unique_ptr<PolicyLearner> learner;
  SafetyModule safety;
  try {
    summarizer = build_summarizer(config, shape.obs_dim, 0);
    const ActionRepresentationModule repr = build_action_repr(config, shape);
    learner = build_learner(config, shape, repr, summarizer->state_dim(), 0);
    safety = build_safety(config, shape, summarizer->state_dim());
  } catch (const std::runtime_error& e) {
    violations.push_back(e.what());
    return violations;
  }

  for (auto& v :
       PearlAgent::validate_composition(*learner, summarizer.get(), safety, shape.discrete))
    violations.push_back(std::move(v));

  const long capacity = config.integer("buffer", "capacity", 10000);
  if (learner->batch_size() > capacity)
    violations.push_back("batch size " + std::to_string(learner->batch_size()) +
                         " exceeds replay buffer capacity " + std::to_string(capacity));
  return violations;
}

}  // namespace pearl
