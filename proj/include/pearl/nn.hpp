#pragma once

#include <string>
#include <vector>

#include "pearl/autodiff.hpp"
#include "pearl/tensor.hpp"

namespace pearl {

enum class Activation { None, Relu, Tanh, Sigmoid, Softmax };

struct MlpSpec {
  long input_dim = 1;
  std::vector<long> hidden_dims;
  long output_dim = 1;
  Activation activation = Activation::Relu;
  Activation final_activation = Activation::None;
};

struct LstmSpec {
  long input_dim = 1;
  long hidden_dim = 1;
  long num_layers = 1;
};

// Per-layer (h, c) pair, each 1 x hidden_dim for online stepping or
// batch x hidden_dim inside training graphs.
struct LstmState {
  std::vector<Tensor> h;
  std::vector<Tensor> c;
};
struct LstmVarState {
  std::vector<Var> h;
  std::vector<Var> c;
};

// Weight init: uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) on linear layers.
void init_linear(ParameterSet& params, const std::string& prefix, long in, long out, Rng& rng);
void init_mlp(ParameterSet& params, const std::string& prefix, const MlpSpec& spec, Rng& rng);
void init_lstm(ParameterSet& params, const std::string& prefix, const LstmSpec& spec, Rng& rng);

Var linear(Tape& tape, const Tape::Params& p, const std::string& prefix, Var input);

// input: batch x input_dim -> batch x output_dim. Records the computation on
// the tape so a later backward() reaches the parameters.
Var forward_mlp(Tape& tape, const Tape::Params& p, const std::string& prefix,
                const MlpSpec& spec, Var input);

// Convenience no-gradient evaluation against a ParameterSet.
Tensor eval_mlp(const ParameterSet& params, const std::string& prefix, const MlpSpec& spec,
                const Tensor& input);

LstmState lstm_zero_state(const LstmSpec& spec, long batch = 1);

// One recurrence step; returns the new state, top-layer h is state.h.back().
LstmVarState lstm_step(Tape& tape, const Tape::Params& p, const std::string& prefix,
                       const LstmSpec& spec, const LstmVarState& state, Var input);

// Dueling head combination: Q = V + A - mean_available(A).
// value: batch x 1, advantages: batch x A, mask: batch x A (1 = available).
Var dueling_combine(Tape& tape, Var value, Var advantages, const Tensor& mask);

}  // namespace pearl
