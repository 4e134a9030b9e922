#include <doctest.h>

#include "pearl/autodiff.hpp"
#include "pearl/nn.hpp"
#include "test_util.hpp"

using namespace pearl;
using namespace pearl::testutil;

TEST_CASE("backward of identity gives gradient 1") {
  ParameterSet params;
  params.add("theta", Tensor::Constant(1, 1, 2.5));
  Tape tape;
  auto p = tape.bind(params);
  tape.backward(p["theta"]);
  CHECK(p["theta"].grad()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("backward of theta^2 at theta=3 gives 6") {
  ParameterSet params;
  params.add("theta", Tensor::Constant(1, 1, 3.0));
  Tape tape;
  auto p = tape.bind(params);
  Var loss = tape.square(p["theta"]);
  tape.backward(loss);
  CHECK(p["theta"].grad()(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("backward rejects non-scalar root") {
  Tape tape;
  Var v = tape.leaf(Tensor::Ones(2, 2), true);
  CHECK_THROWS_AS(tape.backward(v), UsageError);
}

TEST_CASE("unused parameters get zero gradients") {
  ParameterSet params;
  params.add("used", Tensor::Constant(1, 1, 1.0));
  params.add("unused", Tensor::Constant(2, 2, 1.0));
  Tape tape;
  auto p = tape.bind(params);
  tape.backward(tape.square(p["used"]));
  GradientMap grads = tape.gradients(params, p);
  CHECK(grads.at("unused").isZero());
  CHECK(grads.at("used")(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("random MLP gradients match central finite differences") {
  Rng rng(7);
  MlpSpec spec{4, {8}, 3};
  ParameterSet params;
  init_mlp(params, "net", spec, rng);
  Tensor input = random_tensor(5, 4, rng);

  auto loss_fn = [&]() {
    Tape tape;
    auto p = tape.bind(params);
    Var out = forward_mlp(tape, p, "net", spec, tape.constant(input));
    return tape.sum(out).value()(0, 0);
  };

  Tape tape;
  auto p = tape.bind(params);
  Var out = forward_mlp(tape, p, "net", spec, tape.constant(input));
  tape.backward(tape.sum(out));
  GradientMap ad = tape.gradients(params, p);
  GradientMap fd = finite_difference_gradients(params, loss_fn);
  CHECK(max_relative_error(ad, fd) < 1e-4);
}

TEST_CASE("elementwise and structural op gradients match finite differences") {
  Rng rng(11);
  ParameterSet params;
  params.add("x", random_tensor(3, 4, rng));
  params.add("y", random_tensor(3, 4, rng));

  auto build = [&](Tape& tape, const Tape::Params& p) {
    Var x = p["x"], y = p["y"];
    Var a = tape.mul(tape.tanh(x), tape.sigmoid(y));
    Var b = tape.min(a, tape.scale(y, 0.5));
    Var c = tape.concat_cols(b, tape.square(x));
    Var d = tape.slice_cols(c, 2, 4);
    Var e = tape.huber(tape.sub(d, tape.constant(Tensor::Constant(3, 4, 0.3))), 0.7);
    return tape.mean(tape.add(e, tape.abs(tape.slice_cols(c, 0, 4))));
  };

  auto loss_fn = [&]() {
    Tape tape;
    auto p = tape.bind(params);
    return build(tape, p).value()(0, 0);
  };

  Tape tape;
  auto p = tape.bind(params);
  tape.backward(build(tape, p));
  GradientMap ad = tape.gradients(params, p);
  GradientMap fd = finite_difference_gradients(params, loss_fn);
  CHECK(max_relative_error(ad, fd) < 1e-4);
}

TEST_CASE("masked softmax: masked slots zero, rows sum to one, gradcheck") {
  Rng rng(3);
  ParameterSet params;
  params.add("z", random_tensor(4, 5, rng));
  Tensor mask = Tensor::Ones(4, 5);
  mask(0, 1) = 0;
  mask(2, 0) = 0;
  mask(2, 4) = 0;

  Tensor weights = random_tensor(4, 5, rng);
  auto build = [&](Tape& tape, const Tape::Params& p) {
    Var sm = tape.masked_softmax(p["z"], mask);
    return tape.sum(tape.mul(sm, tape.constant(weights)));
  };

  Tape tape;
  auto p = tape.bind(params);
  Var sm = tape.masked_softmax(p["z"], mask);
  for (long i = 0; i < 4; ++i) {
    CHECK(sm.value().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (long j = 0; j < 5; ++j)
      if (mask(i, j) == 0.0) CHECK(sm.value()(i, j) == 0.0);
  }

  auto loss_fn = [&]() {
    Tape t2;
    auto p2 = t2.bind(params);
    return build(t2, p2).value()(0, 0);
  };
  Tape t3;
  auto p3 = t3.bind(params);
  t3.backward(build(t3, p3));
  CHECK(max_relative_error(t3.gradients(params, p3),
                           finite_difference_gradients(params, loss_fn)) < 1e-4);
}

TEST_CASE("masked logsumexp matches scalar computation and gradcheck") {
  Rng rng(5);
  ParameterSet params;
  params.add("z", random_tensor(3, 4, rng, 2.0));
  Tensor mask = Tensor::Ones(3, 4);
  mask(1, 2) = 0;

  Tape tape;
  auto p = tape.bind(params);
  Var lse = tape.masked_logsumexp(p["z"], mask);
  for (long i = 0; i < 3; ++i) {
    double s = 0;
    for (long j = 0; j < 4; ++j)
      if (mask(i, j) != 0.0) s += std::exp(params.at("z")(i, j));
    CHECK(lse.value()(i, 0) == doctest::Approx(std::log(s)));
  }

  auto loss_fn = [&]() {
    Tape t2;
    auto p2 = t2.bind(params);
    return t2.sum(t2.masked_logsumexp(p2["z"], mask)).value()(0, 0);
  };
  Tape t3;
  auto p3 = t3.bind(params);
  t3.backward(t3.sum(t3.masked_logsumexp(p3["z"], mask)));
  CHECK(max_relative_error(t3.gradients(params, p3),
                           finite_difference_gradients(params, loss_fn)) < 1e-4);
}

TEST_CASE("matmul chain reuses a node through two paths") {
  ParameterSet params;
  params.add("w", Tensor::Constant(1, 1, 2.0));
  Tape tape;
  auto p = tape.bind(params);
  Var w = p["w"];
  // f = w*w + w -> f' = 2w + 1 = 5
  Var f = tape.add(tape.mul(w, w), w);
  tape.backward(f);
  CHECK(p["w"].grad()(0, 0) == doctest::Approx(5.0));
}
