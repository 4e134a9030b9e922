#include "pearl/bandits.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <fstream>
#include <sstream>

namespace pearl {

// ---------------------------------------------------------------------------
// LinearBanditModel

LinearBanditModel::LinearBanditModel(long dim) : dim_(dim) {
  if (dim < 1) throw ConfigError("bandit feature dim must be >= 1");
  a_ = Tensor::Identity(dim, dim);
  a_inv_ = Tensor::Identity(dim, dim);
  b_ = Vector::Zero(dim);
  theta_ = Vector::Zero(dim);
}

void LinearBanditModel::update(const Vector& phi, double reward) {
  if (phi.size() != dim_) throw DimensionError("bandit feature width mismatch");
  if (!phi.allFinite() || !std::isfinite(reward))
    throw TrainingError("non-finite bandit update");
  a_ += phi * phi.transpose();
  b_ += reward * phi;
  // Sherman-Morrison rank-1 inverse update.
  const Vector u = a_inv_ * phi;
  a_inv_ -= (u * u.transpose()) / (1.0 + phi.dot(u));
  ++updates_;
  if (updates_ % refactor_period == 0) refactor();
  theta_ = a_inv_ * b_;
}

void LinearBanditModel::refactor() { a_inv_ = a_.llt().solve(Tensor::Identity(dim_, dim_)); }

double LinearBanditModel::predict(const Vector& phi) const {
  if (phi.size() != dim_) throw DimensionError("bandit feature width mismatch");
  return theta_.dot(phi);
}

double LinearBanditModel::bonus(const Vector& phi) const {
  if (phi.size() != dim_) throw DimensionError("bandit feature width mismatch");
  return std::sqrt(std::max(phi.dot(a_inv_ * phi), 0.0));
}

Vector feature_join(const Vector& context, const Vector& action_repr) {
  Vector out(context.size() + action_repr.size());
  out << context, action_repr;
  return out;
}

// ---------------------------------------------------------------------------
// NeuralBanditModel

namespace {

long last_hidden_dim(const NeuralBanditConfig& config) {
  if (config.hidden_dims.empty()) throw ConfigError("neural bandit needs >= 1 hidden layer");
  return config.hidden_dims.back();
}

}  // namespace

NeuralBanditModel::NeuralBanditModel(NeuralBanditConfig config, unsigned long seed)
    : config_(config),
      opt_(OptimizerConfig{OptimizerKind::Adam, config.lr}),
      cov_(last_hidden_dim(config)) {
  if (config_.input_dim < 1) throw ConfigError("neural bandit input_dim must be >= 1");
  if (config_.batch_size < 1) throw ConfigError("neural bandit batch size must be >= 1");
  spec_ = MlpSpec{config_.input_dim, config_.hidden_dims, 1};
  Rng rng(seed);
  init_mlp(params_, "net", spec_, rng);
}

double NeuralBanditModel::predict(const Vector& phi) const {
  return eval_mlp(params_, "net", spec_, phi.transpose())(0, 0);
}

Vector NeuralBanditModel::last_layer_features(const Vector& phi) const {
  Tensor h = phi.transpose();
  for (std::size_t l = 0; l < spec_.hidden_dims.size(); ++l) {
    const std::string layer = "net.l" + std::to_string(l);
    h = (h * params_.at(layer + ".W") + params_.at(layer + ".b")).cwiseMax(0.0);
  }
  return h.row(0).transpose();
}

double NeuralBanditModel::bonus(const Vector& phi) const {
  return cov_.bonus(last_layer_features(phi));
}

double NeuralBanditModel::update(const Tensor& features, const Vector& rewards) {
  if (features.rows() != rewards.size()) throw DimensionError("bandit batch size mismatch");
  if (features.cols() != config_.input_dim) throw DimensionError("bandit feature width mismatch");
  Tape tape;
  auto p = tape.bind(params_);
  Var pred = forward_mlp(tape, p, "net", spec_, tape.constant(features));
  Var loss = tape.mean(tape.square(tape.sub(pred, tape.constant(Tensor(rewards)))));
  const double mse = loss.value()(0, 0);
  if (!std::isfinite(mse)) throw TrainingError("non-finite bandit regression loss");
  tape.backward(loss);
  opt_.step(params_, tape.gradients(params_, p));
  // Covariance over the (freshly updated) network's last-layer features: one
  // rank-1 term per sample.
  for (long i = 0; i < features.rows(); ++i)
    cov_.update(last_layer_features(features.row(i).transpose()), rewards(i));
  return mse;
}

// ---------------------------------------------------------------------------
// Acting

long bandit_act(const Vector& means, const Vector& bonuses,
                const std::vector<std::uint8_t>& mask, ExplorationModule& exploration, Rng& rng,
                bool exploit) {
  bool any = false;
  for (auto m : mask) any = any || m != 0;
  if (!any) throw ContractError("bandit_act: no available actions");
  if (exploit) return masked_argmax(means, mask);
  ScoringContext ctx;
  ctx.means = means;
  ctx.bonuses = bonuses;
  ctx.mask = mask;
  return exploration.explore_discrete(ctx, rng);
}

namespace {

template <typename MeanFn>
Vector per_action(const DiscreteActionSpace& space, const Vector& context, MeanFn&& fn) {
  Vector out = Vector::Zero(space.size());
  for (long a = 0; a < space.size(); ++a)
    if (space.available[static_cast<std::size_t>(a)])
      out(a) = fn(feature_join(context, space.representations.row(a).transpose()));
  return out;
}

}  // namespace

Vector linear_bandit_means(const LinearBanditModel& model, const Vector& context,
                           const DiscreteActionSpace& space) {
  return per_action(space, context, [&](const Vector& phi) { return model.predict(phi); });
}

Vector linear_bandit_bonuses(const LinearBanditModel& model, const Vector& context,
                             const DiscreteActionSpace& space) {
  return per_action(space, context, [&](const Vector& phi) { return model.bonus(phi); });
}

Vector neural_bandit_means(const NeuralBanditModel& model, const Vector& context,
                           const DiscreteActionSpace& space) {
  return per_action(space, context, [&](const Vector& phi) { return model.predict(phi); });
}

Vector neural_bandit_bonuses(const NeuralBanditModel& model, const Vector& context,
                             const DiscreteActionSpace& space) {
  return per_action(space, context, [&](const Vector& phi) { return model.bonus(phi); });
}

// ---------------------------------------------------------------------------
// Supervised-to-bandit protocol

double supervised_to_bandit_reward(long label, long action, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ConfigError("reward noise sigma must be >= 0");
  double r = action == label ? 1.0 : 0.0;
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    r += noise(rng);
  }
  return r;
}

NeuralBanditModel offline_greedy_baseline(const Tensor& contexts,
                                          const std::vector<long>& actions,
                                          const Vector& rewards,
                                          const DiscreteActionSpace& space,
                                          NeuralBanditConfig config, long epochs,
                                          unsigned long seed, Rng& rng) {
  const long n = contexts.rows();
  if (n != static_cast<long>(actions.size()) || n != rewards.size())
    throw DimensionError("offline bandit dataset size mismatch");
  if (n < 1) throw UsageError("offline bandit dataset is empty");
  config.input_dim = contexts.cols() + space.repr_dim();
  NeuralBanditModel model(config, seed);

  Tensor features(n, config.input_dim);
  for (long i = 0; i < n; ++i)
    features.row(i) = feature_join(contexts.row(i).transpose(),
                                   space.representations.row(actions[static_cast<std::size_t>(i)])
                                       .transpose())
                          .transpose();

  std::vector<long> order(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  for (long epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (long start = 0; start < n; start += config.batch_size) {
      const long b = std::min<long>(config.batch_size, n - start);
      Tensor batch(b, config.input_dim);
      Vector r(b);
      for (long i = 0; i < b; ++i) {
        batch.row(i) = features.row(order[static_cast<std::size_t>(start + i)]);
        r(i) = rewards(order[static_cast<std::size_t>(start + i)]);
      }
      model.update(batch, r);
    }
  }
  return model;
}

long greedy_bandit_action(const NeuralBanditModel& model, const Vector& context,
                          const DiscreteActionSpace& space) {
  return masked_argmax(neural_bandit_means(model, context, space), space.available);
}

// ---------------------------------------------------------------------------
// CSV ingestion

SupervisedDataset load_supervised_csv(const std::filesystem::path& path,
                                      const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open CSV file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw UsageError("empty CSV file: " + path.string());

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };

  const std::vector<std::string> header = split(line);
  long label_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == label_column) label_idx = static_cast<long>(i);
  if (label_idx < 0)
    throw ConfigError("CSV has no column named '" + label_column + "': " + path.string());
  const long feature_dim = static_cast<long>(header.size()) - 1;
  if (feature_dim < 1) throw UsageError("CSV has no feature columns: " + path.string());

  SupervisedDataset out;
  std::vector<Vector> rows;
  std::map<std::string, long> label_ids;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (static_cast<long>(cells.size()) != static_cast<long>(header.size()))
      throw UsageError("CSV row " + std::to_string(line_no) + " has wrong column count");
    Vector features(feature_dim);
    long j = 0;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (static_cast<long>(c) == label_idx) continue;
      try {
        features(j++) = std::stod(cells[c]);
      } catch (const std::exception&) {
        throw UsageError("CSV row " + std::to_string(line_no) + ": non-numeric feature '" +
                         cells[c] + "'");
      }
    }
    const std::string& token = cells[static_cast<std::size_t>(label_idx)];
    auto [it, inserted] = label_ids.emplace(token, static_cast<long>(out.label_names.size()));
    if (inserted) out.label_names.push_back(token);
    out.labels.push_back(it->second);
    rows.push_back(std::move(features));
  }
  if (rows.empty()) throw UsageError("CSV has no data rows: " + path.string());
  out.features.resize(static_cast<long>(rows.size()), feature_dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.features.row(static_cast<long>(i)) = rows[i].transpose();
  return out;
}

}  // namespace pearl
