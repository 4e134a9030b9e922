#include "pearl/offline_rl.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>

#include "pearl/batch_util.hpp"
#include "pearl/agent.hpp"
#include "pearl/losses.hpp"

namespace pearl {
namespace {

constexpr int kSizeDigits = 12;  // zero-padded so the header can be patched in place

std::string header_line(const DatasetMeta& meta, long size) {
  std::ostringstream padded;
  padded << std::setw(kSizeDigits) << std::setfill('0') << size;
  nlohmann::json j;
  j["format"] = "pearl-offline-dataset";
  j["version"] = 1;
  j["env"] = meta.env;
  j["behavior_policy"] = meta.behavior_policy;
  j["seed"] = meta.seed;
  j["size"] = padded.str();  // string so the padded digits stay valid JSON
  j["state_dim"] = meta.state_dim;
  j["action_dim"] = meta.action_dim;
  j["num_slots"] = meta.num_slots;
  return j.dump() + "\n";
}

void put_doubles(std::ostream& out, const double* data, long n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void put_i64(std::ostream& out, std::int64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_u8(std::ostream& out, std::uint8_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void get_doubles(std::istream& in, double* data, long n) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

std::int64_t get_i64(std::istream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

std::uint8_t get_u8(std::istream& in) {
  std::uint8_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

GradientMap filter_prefix(const GradientMap& grads, const std::string& prefix) {
  GradientMap out;
  for (const auto& [name, g] : grads)
    if (name.rfind(prefix, 0) == 0) out[name] = g;
  return out;
}

Vector squash_row(const Tensor& raw, long row, const Vector& mid, const Vector& half) {
  Vector out(mid.size());
  for (long j = 0; j < out.size(); ++j) out(j) = mid(j) + half(j) * std::tanh(raw(row, j));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset I/O

DatasetWriter::DatasetWriter(const std::filesystem::path& path, DatasetMeta meta)
    : meta_(std::move(meta)), path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw UsageError("cannot open dataset file for writing: " + path.string());
  if (meta_.state_dim <= 0 || meta_.action_dim <= 0)
    throw ConfigError("dataset metadata needs positive state/action dims");
  out_ << header_line(meta_, 0);
  if (!out_) throw UsageError("dataset header write failed: " + path.string());
}

DatasetWriter::~DatasetWriter() {
  try {
    if (!closed_) close();
  } catch (...) {
  }
}

void DatasetWriter::append(const Transition& t) {
  if (closed_) throw UsageError("append after close");
  if (t.state.size() != meta_.state_dim || t.next_state.size() != meta_.state_dim)
    throw DimensionError("dataset record state width mismatch");
  if (t.action_repr.size() != meta_.action_dim)
    throw DimensionError("dataset record action width mismatch");
  put_doubles(out_, t.state.data(), meta_.state_dim);
  put_doubles(out_, t.action_repr.data(), meta_.action_dim);
  put_i64(out_, t.action_index);
  put_doubles(out_, &t.reward, 1);
  put_u8(out_, t.cost.has_value() ? 1 : 0);
  const double cost = t.cost.value_or(0.0);
  put_doubles(out_, &cost, 1);
  put_doubles(out_, t.next_state.data(), meta_.state_dim);
  put_u8(out_, t.terminated ? 1 : 0);
  put_u8(out_, t.truncated ? 1 : 0);
  put_u8(out_, t.next_action_index.has_value() ? 1 : 0);
  put_i64(out_, t.next_action_index.value_or(-1));
  if (meta_.num_slots > 0) {
    const long a = meta_.num_slots, r = meta_.action_dim;
    if (t.curr_available_actions.rows() != a || t.curr_available_actions.cols() != r ||
        t.next_available_actions.rows() != a || t.next_available_actions.cols() != r)
      throw DimensionError("dataset record action-slot shape mismatch");
    // Eigen is column-major; serialize row-major for a stable on-disk layout.
    for (long i = 0; i < a; ++i)
      for (long j = 0; j < r; ++j) put_doubles(out_, &t.curr_available_actions(i, j), 1);
    put_doubles(out_, t.curr_mask.data(), a);
    for (long i = 0; i < a; ++i)
      for (long j = 0; j < r; ++j) put_doubles(out_, &t.next_available_actions(i, j), 1);
    put_doubles(out_, t.next_mask.data(), a);
  }
  if (!out_) throw UsageError("dataset record write failed: " + path_.string());
  ++written_;
}

void DatasetWriter::close() {
  if (closed_) return;
  closed_ = true;
  out_.flush();
  out_.close();
  // Patch the padded size field: rewrite the header line, same byte count.
  std::string header = header_line(meta_, written_);
  std::fstream patch(path_, std::ios::binary | std::ios::in | std::ios::out);
  if (!patch) throw UsageError("cannot reopen dataset for header patch: " + path_.string());
  std::string old_header;
  std::getline(patch, old_header);
  if (old_header.size() + 1 != header.size())
    throw UsageError("dataset header size drifted; cannot patch");
  patch.seekp(0);
  patch.write(header.data(), static_cast<std::streamsize>(header.size()));
  if (!patch) throw UsageError("dataset header patch failed: " + path_.string());
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open dataset file: " + path.string());
  std::string header;
  std::getline(in, header);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("bad dataset header: ") + e.what());
  }
  if (j.value("format", "") != "pearl-offline-dataset")
    throw UsageError("not a dataset file: " + path.string());
  if (j.value("version", 0) != 1) throw UsageError("unsupported dataset version");

  OfflineDataset out;
  out.meta.env = j.value("env", "");
  out.meta.behavior_policy = j.value("behavior_policy", "");
  out.meta.seed = j.value("seed", 0ul);
  out.meta.size = std::stol(j.value("size", std::string("0")));
  out.meta.state_dim = j.value("state_dim", 0l);
  out.meta.action_dim = j.value("action_dim", 0l);
  out.meta.num_slots = j.value("num_slots", 0l);
  if (out.meta.size <= 0) throw UsageError("dataset is empty");

  const long s = out.meta.state_dim, r = out.meta.action_dim, a = out.meta.num_slots;
  out.transitions.reserve(static_cast<std::size_t>(out.meta.size));
  for (long rec = 0; rec < out.meta.size; ++rec) {
    Transition t;
    t.state.resize(s);
    get_doubles(in, t.state.data(), s);
    t.action_repr.resize(r);
    get_doubles(in, t.action_repr.data(), r);
    t.action_index = get_i64(in);
    get_doubles(in, &t.reward, 1);
    const bool has_cost = get_u8(in) != 0;
    double cost = 0.0;
    get_doubles(in, &cost, 1);
    if (has_cost) t.cost = cost;
    t.next_state.resize(s);
    get_doubles(in, t.next_state.data(), s);
    t.terminated = get_u8(in) != 0;
    t.truncated = get_u8(in) != 0;
    const bool has_next_action = get_u8(in) != 0;
    const std::int64_t next_action = get_i64(in);
    if (has_next_action) t.next_action_index = next_action;
    if (a > 0) {
      t.curr_available_actions.resize(a, r);
      for (long i = 0; i < a; ++i)
        for (long c = 0; c < r; ++c) get_doubles(in, &t.curr_available_actions(i, c), 1);
      t.curr_mask.resize(1, a);
      get_doubles(in, t.curr_mask.data(), a);
      t.next_available_actions.resize(a, r);
      for (long i = 0; i < a; ++i)
        for (long c = 0; c < r; ++c) get_doubles(in, &t.next_available_actions(i, c), 1);
      t.next_mask.resize(1, a);
      get_doubles(in, t.next_mask.data(), a);
    }
    if (!in) throw UsageError("truncated dataset file: " + path.string());
    out.transitions.push_back(std::move(t));
  }
  return out;
}

void fill_buffer(const OfflineDataset& dataset, ReplayBuffer& buffer) {
  for (const auto& t : dataset.transitions) buffer.push(t);
}

// ---------------------------------------------------------------------------
// Dataset generation

DatasetMeta generate_dataset(Environment& env, PearlAgent& behavior, long steps,
                             const std::filesystem::path& path, std::uint64_t seed,
                             const std::string& env_name, const std::string& behavior_policy,
                             bool learn) {
  if (steps < 1) throw ConfigError("generate_dataset requires steps >= 1");

  auto [observation, space] = env.reset(seed);
  behavior.reset(observation, space);

  DatasetMeta meta;
  meta.env = env_name;
  meta.behavior_policy = behavior_policy;
  meta.seed = seed;
  meta.state_dim = behavior.learner().state_dim();
  if (is_discrete(space)) {
    const auto& discrete = as_discrete(space);
    meta.num_slots = discrete.size();
    meta.action_dim = behavior.action_repr().dim(discrete);
  } else {
    meta.num_slots = 0;
    meta.action_dim = as_box(space).dim();
  }

  DatasetWriter writer(path, meta);
  for (long step = 0; step < steps; ++step) {
    const Action action = behavior.act();
    const ActionResult result = env.step(action);
    behavior.observe(result);
    writer.append(behavior.buffer().at(behavior.buffer().size() - 1));
    if (learn) behavior.learn();
    if (result.done()) {
      auto [next_observation, next_space] = env.reset();
      behavior.reset(next_observation, next_space);
    }
  }
  writer.close();
  meta.size = writer.written();
  return meta;
}

// ---------------------------------------------------------------------------
// Scoring and warm starts

double normalized_score(double random_return, double agent_return, double expert_return) {
  if (!(expert_return > random_return))
    throw UsageError("normalized_score: expert return must exceed random return");
  return (agent_return - random_return) / (expert_return - random_return);
}

void warm_start(PolicyLearner& online, PolicyLearner& offline) {
  try {
    online.parameters().copy_values_from(offline.parameters());
  } catch (const UsageError& e) {
    throw ConfigError(std::string("warm_start: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// CQL

double cql_penalty(const Vector& q, const Tensor& mask_row, long data_action) {
  if (q.size() != mask_row.cols()) throw DimensionError("cql_penalty shape mismatch");
  if (data_action < 0 || data_action >= q.size() || mask_row(0, data_action) == 0)
    throw ContractError("cql_penalty: data action not available");
  double max_q = -std::numeric_limits<double>::infinity();
  for (long a = 0; a < q.size(); ++a)
    if (mask_row(0, a) != 0) max_q = std::max(max_q, q(a));
  double acc = 0.0;
  for (long a = 0; a < q.size(); ++a)
    if (mask_row(0, a) != 0) acc += std::exp(q(a) - max_q);
  return max_q + std::log(acc) - q(data_action);
}

CqlLearner::CqlLearner(QLearnerConfig config, double cql_weight, ExplorationConfig exploration,
                       unsigned long seed)
    : config_(config),
      cql_weight_(cql_weight),
      net_(config.state_dim, config.action_repr_dim, config.hidden_dims, false),
      opt_(OptimizerConfig{OptimizerKind::AdamW, config.lr}),
      exploration_(exploration) {
  if (cql_weight_ < 0.0) throw ConfigError("CQL weight must be >= 0");
  Rng rng(seed);
  net_.init(params_, "q", rng);
  target_params_ = params_;
}

Vector CqlLearner::q_values(const Vector& state, const Tensor& action_reprs,
                            const Tensor& mask_row) const {
  Vector q = net_.eval_slots(params_, "q", state, action_reprs, mask_row).col(0);
  for (long a = 0; a < q.size(); ++a)
    if (mask_row(0, a) == 0) q(a) = -std::numeric_limits<double>::infinity();
  return q;
}

long CqlLearner::act_discrete(const SubjectiveState& state, const Tensor& action_reprs,
                              const Tensor& mask_row, bool exploit, Rng& rng) {
  Vector q = q_values(state, action_reprs, mask_row);
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(mask_row.cols()));
  for (long a = 0; a < mask_row.cols(); ++a) mask[static_cast<std::size_t>(a)] = mask_row(0, a) != 0;
  if (exploit) return masked_argmax(q, mask);
  ScoringContext ctx;
  ctx.means = q;
  ctx.mask = mask;
  return exploration_.explore_discrete(ctx, rng);
}

std::pair<double, double> CqlLearner::step_batch(const std::vector<const Transition*>& batch) {
  const long b = static_cast<long>(batch.size());
  const long num_slots = batch[0]->curr_available_actions.rows();

  // DQN targets from the target network.
  Vector targets(b);
  {
    Tape tape;
    auto pt = tape.bind(target_params_);
    Tensor next_masks = stack_masks(batch, true);
    Tensor qn = net_
                    .forward(tape, pt, "q", tape.constant(stack_states(batch, true)),
                             batch_slot_reprs(batch, true), num_slots, next_masks)
                    .value();
    for (long i = 0; i < b; ++i) {
      const auto& t = *batch[static_cast<std::size_t>(i)];
      if (t.terminated) {
        targets(i) = t.reward;
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (long a = 0; a < num_slots; ++a)
        if (t.next_mask(0, a) != 0) best = std::max(best, qn(i, a));
      targets(i) = t.reward + config_.gamma * best;
    }
  }

  Tape tape;
  auto p = tape.bind(params_);
  Tensor curr_masks = stack_masks(batch, false);
  Var q = net_.forward(tape, p, "q", tape.constant(stack_states(batch, false)),
                       batch_slot_reprs(batch, false), num_slots, curr_masks);
  Var pred = tape.row_sum(tape.mul(q, tape.constant(taken_onehot(batch, num_slots))));
  Var td = tape.mean(tape.square(tape.sub(pred, tape.constant(Tensor(targets)))));
  Var lse = tape.masked_logsumexp(q, curr_masks);
  Var penalty = tape.mean(tape.sub(lse, pred));
  Var loss = tape.add(td, tape.scale(penalty, cql_weight_));
  const double td_v = td.value()(0, 0);
  const double pen_v = penalty.value()(0, 0);
  if (!std::isfinite(td_v + pen_v)) throw TrainingError("non-finite CQL loss");
  tape.backward(loss);
  opt_.step(params_, tape.gradients(params_, p));

  if (++steps_since_sync_ >= config_.target_update_period) {
    steps_since_sync_ = 0;
    soft_update(target_params_, params_, config_.target_step_size);
  }
  return {td_v, pen_v};
}

LossReport CqlLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (buffer.size() < static_cast<std::size_t>(config_.batch_size)) return report;
  double td = 0.0, pen = 0.0;
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.batch_size), rng);
    std::tie(td, pen) = step_batch(batch);
    ++report.updates;
  }
  report.values["td_loss"] = td;
  report.values["cql_penalty"] = pen;
  return report;
}

// ---------------------------------------------------------------------------
// IQL

Vector awr_weights(const Vector& advantages, double temperature, double clip) {
  if (temperature <= 0.0) throw ConfigError("AWR temperature must be > 0");
  Vector w(advantages.size());
  for (long i = 0; i < w.size(); ++i)
    w(i) = std::min(std::exp(advantages(i) / temperature), clip);
  return w;
}

IqlLearner::IqlLearner(IqlConfig config, BoxActionSpace space, unsigned long seed)
    : config_(config),
      space_(std::move(space)),
      value_opt_(OptimizerConfig{OptimizerKind::AdamW, config.value_lr}),
      critic_opt_(OptimizerConfig{OptimizerKind::AdamW, config.critic_lr}),
      actor_opt_(OptimizerConfig{OptimizerKind::AdamW, config.actor_lr}) {
  if (!(config_.expectile_tau >= 0.5 && config_.expectile_tau < 1.0))
    throw ConfigError("IQL expectile tau must lie in [0.5, 1)");
  if (config_.temperature <= 0.0 || config_.weight_clip <= 0.0)
    throw ConfigError("IQL temperature/clip must be > 0");
  if (config_.action_dim != space_.dim()) throw ConfigError("action_dim/space mismatch");
  value_spec_ = MlpSpec{config_.state_dim, config_.hidden_dims, 1};
  critic_spec_ = MlpSpec{config_.state_dim + config_.action_dim, config_.hidden_dims, 1};
  actor_spec_ = MlpSpec{config_.state_dim, config_.hidden_dims, config_.action_dim};
  Rng rng(seed);
  init_mlp(params_, "v", value_spec_, rng);
  init_mlp(params_, "q1", critic_spec_, rng);
  init_mlp(params_, "q2", critic_spec_, rng);
  init_mlp(params_, "actor", actor_spec_, rng);
  target_params_ = params_;
}

double IqlLearner::value(const Vector& state) const {
  return eval_mlp(params_, "v", value_spec_, state.transpose())(0, 0);
}

Vector IqlLearner::policy_mean(const Vector& state) const {
  Tensor raw = eval_mlp(params_, "actor", actor_spec_, state.transpose());
  Vector mid = 0.5 * (space_.high + space_.low);
  Vector half = 0.5 * (space_.high - space_.low);
  return squash_row(raw, 0, mid, half);
}

Vector IqlLearner::act_box(const SubjectiveState& state, const BoxActionSpace& /*space*/,
                           bool /*exploit*/, Rng& /*rng*/) {
  return policy_mean(state);
}

std::tuple<double, double, double> IqlLearner::step_batch(
    const std::vector<const Transition*>& batch) {
  const long b = static_cast<long>(batch.size());
  Tensor states = stack_states(batch, false);
  Tensor next_states = stack_states(batch, true);
  Tensor data_actions = stack_taken_reprs(batch);
  Tensor sa(b, config_.state_dim + config_.action_dim);
  sa << states, data_actions;

  // min over target twin critics at the data actions.
  Tensor q1t = eval_mlp(target_params_, "q1", critic_spec_, sa);
  Tensor q2t = eval_mlp(target_params_, "q2", critic_spec_, sa);
  Tensor min_qt = q1t.cwiseMin(q2t);

  // Value step: expectile regression of minQ_target onto V(s).
  double value_loss;
  {
    Tape tape;
    auto p = tape.bind(params_);
    Var v = forward_mlp(tape, p, "v", value_spec_, tape.constant(states));
    Var loss = expectile_loss(tape, v, min_qt, config_.expectile_tau);
    value_loss = loss.value()(0, 0);
    tape.backward(loss);
    value_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "v"));
  }

  // Critic step: TD toward r + gamma * V(s').
  double critic_loss;
  {
    Tensor vn = eval_mlp(params_, "v", value_spec_, next_states);
    Vector targets(b);
    for (long i = 0; i < b; ++i) {
      const auto& t = *batch[static_cast<std::size_t>(i)];
      targets(i) = t.reward + (t.terminated ? 0.0 : config_.gamma * vn(i, 0));
    }
    Tape tape;
    auto p = tape.bind(params_);
    Var input = tape.constant(sa);
    Var tgt = tape.constant(Tensor(targets));
    Var loss = tape.add(
        tape.mean(tape.square(tape.sub(forward_mlp(tape, p, "q1", critic_spec_, input), tgt))),
        tape.mean(tape.square(tape.sub(forward_mlp(tape, p, "q2", critic_spec_, input), tgt))));
    critic_loss = loss.value()(0, 0);
    if (!std::isfinite(critic_loss)) throw TrainingError("non-finite IQL critic loss");
    tape.backward(loss);
    critic_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "q"));
  }

  // Actor step: advantage-weighted regression onto the data actions.
  double actor_loss;
  {
    Tensor v = eval_mlp(params_, "v", value_spec_, states);
    Vector adv(b);
    for (long i = 0; i < b; ++i) adv(i) = min_qt(i, 0) - v(i, 0);
    Vector w = awr_weights(adv, config_.temperature, config_.weight_clip);
    const Vector mid = 0.5 * (space_.high + space_.low);
    const Vector half = 0.5 * (space_.high - space_.low);
    Tape tape;
    auto p = tape.bind(params_);
    Var raw = forward_mlp(tape, p, "actor", actor_spec_, tape.constant(states));
    Var squashed = tape.tanh(raw);
    Var mu = tape.add_rowvec(
        tape.mul(squashed, tape.constant(Tensor(half.transpose().replicate(b, 1)))),
        tape.constant(Tensor(mid.transpose())));
    Var err = tape.row_sum(tape.square(tape.sub(mu, tape.constant(data_actions))));
    Var loss = tape.mean(tape.mul_colvec(err, tape.constant(Tensor(w))));
    actor_loss = loss.value()(0, 0);
    if (!std::isfinite(actor_loss)) throw TrainingError("non-finite IQL actor loss");
    tape.backward(loss);
    actor_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "actor"));
  }

  soft_update(target_params_, params_, config_.tau_soft);
  return {value_loss, critic_loss, actor_loss};
}

LossReport IqlLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (buffer.size() < static_cast<std::size_t>(config_.batch_size)) return report;
  double vl = 0.0, cl = 0.0, al = 0.0;
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.batch_size), rng);
    std::tie(vl, cl, al) = step_batch(batch);
    ++report.updates;
  }
  report.values["value_loss"] = vl;
  report.values["critic_loss"] = cl;
  report.values["actor_loss"] = al;
  return report;
}

// ---------------------------------------------------------------------------
// TD3BC

Td3BcLearner::Td3BcLearner(AcConfig config, double bc_weight, BoxActionSpace space,
                           unsigned long seed)
    : config_(config),
      bc_weight_(bc_weight),
      space_(std::move(space)),
      actor_opt_(OptimizerConfig{OptimizerKind::AdamW, config.actor_lr}),
      critic_opt_(OptimizerConfig{OptimizerKind::AdamW, config.critic_lr}),
      noise_rng_(seed ^ 0xc2b2ae3d27d4eb4full) {
  if (bc_weight_ < 0.0) throw ConfigError("BC weight must be >= 0");
  if (config_.action_dim != space_.dim()) throw ConfigError("action_dim/space mismatch");
  actor_spec_ = MlpSpec{config_.state_dim, config_.hidden_dims, config_.action_dim};
  critic_spec_ = MlpSpec{config_.state_dim + config_.action_dim, config_.hidden_dims, 1};
  Rng rng(seed);
  init_mlp(params_, "actor", actor_spec_, rng);
  init_mlp(params_, "c1", critic_spec_, rng);
  init_mlp(params_, "c2", critic_spec_, rng);
  target_params_ = params_;
}

Vector Td3BcLearner::policy_action(const Vector& state) const {
  Tensor raw = eval_mlp(params_, "actor", actor_spec_, state.transpose());
  Vector mid = 0.5 * (space_.high + space_.low);
  Vector half = 0.5 * (space_.high - space_.low);
  return squash_row(raw, 0, mid, half);
}

Vector Td3BcLearner::act_box(const SubjectiveState& state, const BoxActionSpace& /*space*/,
                             bool /*exploit*/, Rng& /*rng*/) {
  return policy_action(state);
}

std::pair<double, double> Td3BcLearner::step_batch(const std::vector<const Transition*>& batch) {
  const long b = static_cast<long>(batch.size());
  const Vector mid = 0.5 * (space_.high + space_.low);
  const Vector half = 0.5 * (space_.high - space_.low);
  Tensor states = stack_states(batch, false);
  Tensor data_actions = stack_taken_reprs(batch);

  // TD3 targets: smoothed target-actor actions, min of twin target critics.
  Vector targets(b);
  {
    Tensor next_states = stack_states(batch, true);
    Tensor raw_next = eval_mlp(target_params_, "actor", actor_spec_, next_states);
    Tensor next_actions(b, config_.action_dim);
    std::normal_distribution<double> smooth(0.0, config_.smoothing_sigma);
    for (long i = 0; i < b; ++i)
      for (long j = 0; j < config_.action_dim; ++j) {
        double a = mid(j) + half(j) * std::tanh(raw_next(i, j));
        a += std::clamp(smooth(noise_rng_), -config_.smoothing_clip, config_.smoothing_clip);
        next_actions(i, j) = std::clamp(a, space_.low(j), space_.high(j));
      }
    Tensor next_in(b, config_.state_dim + config_.action_dim);
    next_in << next_states, next_actions;
    Tensor q1t = eval_mlp(target_params_, "c1", critic_spec_, next_in);
    Tensor q2t = eval_mlp(target_params_, "c2", critic_spec_, next_in);
    for (long i = 0; i < b; ++i) {
      const auto& t = *batch[static_cast<std::size_t>(i)];
      targets(i) = t.reward +
                   (t.terminated ? 0.0 : config_.gamma * std::min(q1t(i, 0), q2t(i, 0)));
    }
  }

  double critic_loss;
  {
    Tape tape;
    auto p = tape.bind(params_);
    Tensor curr_in(b, config_.state_dim + config_.action_dim);
    curr_in << states, data_actions;
    Var input = tape.constant(curr_in);
    Var tgt = tape.constant(Tensor(targets));
    Var loss = tape.add(
        tape.mean(tape.square(tape.sub(forward_mlp(tape, p, "c1", critic_spec_, input), tgt))),
        tape.mean(tape.square(tape.sub(forward_mlp(tape, p, "c2", critic_spec_, input), tgt))));
    critic_loss = loss.value()(0, 0);
    if (!std::isfinite(critic_loss)) throw TrainingError("non-finite TD3BC critic loss");
    tape.backward(loss);
    critic_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "c"));
  }
  ++critic_updates_;

  double actor_loss = std::numeric_limits<double>::quiet_NaN();
  if (critic_updates_ % config_.actor_delay == 0) {
    Tape tape;
    auto p = tape.bind(params_);
    Var s = tape.constant(states);
    Var raw = forward_mlp(tape, p, "actor", actor_spec_, s);
    Var mu = tape.add_rowvec(
        tape.mul(tape.tanh(raw), tape.constant(Tensor(half.transpose().replicate(b, 1)))),
        tape.constant(Tensor(mid.transpose())));
    Var q = forward_mlp(tape, p, "c1", critic_spec_, tape.concat_cols(s, mu));
    const double mean_abs_q = q.value().cwiseAbs().mean();
    const double lambda_hat = bc_weight_ / std::max(mean_abs_q, 1e-8);
    Var bc = tape.mean(tape.row_sum(tape.square(tape.sub(mu, tape.constant(data_actions)))));
    Var loss = tape.add(tape.scale(tape.mean(q), -lambda_hat), bc);
    actor_loss = loss.value()(0, 0);
    if (!std::isfinite(actor_loss)) throw TrainingError("non-finite TD3BC actor loss");
    tape.backward(loss);
    actor_opt_.step(params_, filter_prefix(tape.gradients(params_, p), "actor"));
    ++actor_updates_;
    soft_update(target_params_, params_, config_.tau);
  }
  return {critic_loss, actor_loss};
}

LossReport Td3BcLearner::learn(ReplayBuffer& buffer, Rng& rng) {
  LossReport report;
  if (buffer.size() < static_cast<std::size_t>(config_.batch_size)) return report;
  double cl = 0.0, al = std::numeric_limits<double>::quiet_NaN();
  for (long r = 0; r < config_.training_rounds; ++r) {
    auto batch = buffer.sample(static_cast<std::size_t>(config_.batch_size), rng);
    auto [c, a] = step_batch(batch);
    cl = c;
    if (std::isfinite(a)) al = a;
    ++report.updates;
  }
  report.values["critic_loss"] = cl;
  if (std::isfinite(al)) report.values["actor_loss"] = al;
  return report;
}

}  // namespace pearl
