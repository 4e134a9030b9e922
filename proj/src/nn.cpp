#include "pearl/nn.hpp"

#include <cmath>

namespace pearl {

namespace {

Tensor uniform_init(long rows, long cols, long fan_in, Rng& rng) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) t(i, j) = dist(rng);
  return t;
}

Var activate(Tape& tape, Var x, Activation a) {
  switch (a) {
    case Activation::None: return x;
    case Activation::Relu: return tape.relu(x);
    case Activation::Tanh: return tape.tanh(x);
    case Activation::Sigmoid: return tape.sigmoid(x);
    case Activation::Softmax: {
      Tensor ones = Tensor::Ones(x.rows(), x.cols());
      return tape.masked_softmax(x, ones);
    }
  }
  throw UsageError("unknown activation");
}

}  // namespace

void init_linear(ParameterSet& params, const std::string& prefix, long in, long out, Rng& rng) {
  params.add(prefix + ".W", uniform_init(in, out, in, rng));
  params.add(prefix + ".b", uniform_init(1, out, in, rng));
}

void init_mlp(ParameterSet& params, const std::string& prefix, const MlpSpec& spec, Rng& rng) {
  if (spec.input_dim < 1 || spec.output_dim < 1) throw ConfigError("mlp dims must be >= 1");
  for (long d : spec.hidden_dims)
    if (d < 1) throw ConfigError("mlp dims must be >= 1");
  long in = spec.input_dim;
  for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
    init_linear(params, prefix + ".l" + std::to_string(l), in, spec.hidden_dims[l], rng);
    in = spec.hidden_dims[l];
  }
  init_linear(params, prefix + ".out", in, spec.output_dim, rng);
}

Var linear(Tape& tape, const Tape::Params& p, const std::string& prefix, Var input) {
  return tape.add_rowvec(tape.matmul(input, p[prefix + ".W"]), p[prefix + ".b"]);
}

Var forward_mlp(Tape& tape, const Tape::Params& p, const std::string& prefix,
                const MlpSpec& spec, Var input) {
  if (input.cols() != spec.input_dim)
    throw DimensionError("forward_mlp: input width " + std::to_string(input.cols()) +
                         " != spec input_dim " + std::to_string(spec.input_dim));
  Var h = input;
  for (std::size_t l = 0; l < spec.hidden_dims.size(); ++l) {
    h = linear(tape, p, prefix + ".l" + std::to_string(l), h);
    h = activate(tape, h, spec.activation);
  }
  h = linear(tape, p, prefix + ".out", h);
  return activate(tape, h, spec.final_activation);
}

Tensor eval_mlp(const ParameterSet& params, const std::string& prefix, const MlpSpec& spec,
                const Tensor& input) {
  Tape tape;
  auto p = tape.bind(params);
  return forward_mlp(tape, p, prefix, spec, tape.constant(input)).value();
}

void init_lstm(ParameterSet& params, const std::string& prefix, const LstmSpec& spec, Rng& rng) {
  if (spec.hidden_dim < 1 || spec.num_layers < 1) throw ConfigError("lstm dims must be >= 1");
  long in = spec.input_dim;
  for (long l = 0; l < spec.num_layers; ++l) {
    std::string layer = prefix + ".l" + std::to_string(l);
    // Gate order along columns: input, forget, cell, output.
    params.add(layer + ".Wx", uniform_init(in, 4 * spec.hidden_dim, in, rng));
    params.add(layer + ".Wh",
               uniform_init(spec.hidden_dim, 4 * spec.hidden_dim, spec.hidden_dim, rng));
    params.add(layer + ".b", uniform_init(1, 4 * spec.hidden_dim, spec.hidden_dim, rng));
    in = spec.hidden_dim;
  }
}

LstmState lstm_zero_state(const LstmSpec& spec, long batch) {
  LstmState s;
  for (long l = 0; l < spec.num_layers; ++l) {
    s.h.push_back(Tensor::Zero(batch, spec.hidden_dim));
    s.c.push_back(Tensor::Zero(batch, spec.hidden_dim));
  }
  return s;
}

LstmVarState lstm_step(Tape& tape, const Tape::Params& p, const std::string& prefix,
                       const LstmSpec& spec, const LstmVarState& state, Var input) {
  if (input.cols() != spec.input_dim)
    throw DimensionError("lstm_step: input width mismatch");
  if (static_cast<long>(state.h.size()) != spec.num_layers)
    throw DimensionError("lstm_step: state layer count mismatch");
  LstmVarState out;
  Var x = input;
  long H = spec.hidden_dim;
  for (long l = 0; l < spec.num_layers; ++l) {
    std::string layer = prefix + ".l" + std::to_string(l);
    Var gates = tape.add_rowvec(
        tape.add(tape.matmul(x, p[layer + ".Wx"]), tape.matmul(state.h[l], p[layer + ".Wh"])),
        p[layer + ".b"]);
    Var i = tape.sigmoid(tape.slice_cols(gates, 0, H));
    Var f = tape.sigmoid(tape.slice_cols(gates, H, H));
    Var g = tape.tanh(tape.slice_cols(gates, 2 * H, H));
    Var o = tape.sigmoid(tape.slice_cols(gates, 3 * H, H));
    Var c = tape.add(tape.mul(f, state.c[l]), tape.mul(i, g));
    Var h = tape.mul(o, tape.tanh(c));
    out.c.push_back(c);
    out.h.push_back(h);
    x = h;
  }
  return out;
}

Var dueling_combine(Tape& tape, Var value, Var advantages, const Tensor& mask) {
  if (value.cols() != 1 || value.rows() != advantages.rows())
    throw DimensionError("dueling_combine: value must be batch x 1");
  if (mask.rows() != advantages.rows() || mask.cols() != advantages.cols())
    throw DimensionError("dueling_combine: mask shape mismatch");
  Eigen::VectorXd counts = mask.rowwise().sum();
  if ((counts.array() < 1.0).any())
    throw ContractError("dueling_combine: row with no available actions");
  Var masked_adv = tape.mul(advantages, tape.constant(mask));
  Var inv_counts = tape.constant(Tensor(counts.cwiseInverse()));
  Var mean_adv = tape.mul(tape.row_sum(masked_adv), inv_counts);  // batch x 1
  // Q_a = V + A_a - mean_available(A); computed on all slots, callers mask.
  Var centered = tape.sub(advantages, tape.mul_colvec(tape.constant(
                            Tensor::Ones(advantages.rows(), advantages.cols())), mean_adv));
  return tape.add(centered, tape.mul_colvec(
                      tape.constant(Tensor::Ones(advantages.rows(), advantages.cols())), value));
}

}  // namespace pearl
