#include <doctest.h>

#include "pearl/autodiff.hpp"
#include "pearl/history.hpp"
#include "test_util.hpp"

using namespace pearl;

TEST_CASE("identity summarizer passes observations through") {
  IdentitySummarizer s(3);
  Vector obs(3);
  obs << 1, 2, 3;
  s.reset(obs);
  CHECK(s.current_state() == obs);
  Vector obs2(3);
  obs2 << 4, 5, 6;
  CHECK(s.observe(obs2) == obs2);
  Vector bad(2);
  CHECK_THROWS_AS(s.observe(bad), ContractError);
}

// [DERIVED] stacking L=3, dim=2, after one obs [1,2] -> [1,2,0,0,0,0]
TEST_CASE("stacking summarizer zero-pads newest-first") {
  StackingSummarizer s(2, 3);
  CHECK(s.state_dim() == 6);
  Vector o1(2);
  o1 << 1, 2;
  s.reset(o1);
  Vector st = s.current_state();
  REQUIRE(st.size() == 6);
  CHECK(st(0) == 1.0);
  CHECK(st(1) == 2.0);
  for (long i = 2; i < 6; ++i) CHECK(st(i) == 0.0);  // (L-1)*dim zeros after reset

  Vector o2(2);
  o2 << 3, 4;
  st = s.observe(o2);
  CHECK(st(0) == 3.0);  // newest first
  CHECK(st(1) == 4.0);
  CHECK(st(2) == 1.0);
  CHECK(st(3) == 2.0);
  CHECK(st(4) == 0.0);
}

TEST_CASE("stacking: repeated observation yields identical blocks, order matters") {
  StackingSummarizer s(1, 3);
  Vector a(1), b(1);
  a << 7;
  b << 9;
  s.reset(a);
  s.observe(a);
  Vector st = s.observe(a);
  CHECK(st(0) == st(1));
  CHECK(st(1) == st(2));

  StackingSummarizer s2(1, 2);
  s2.reset(a);
  Vector ab = s2.observe(b);
  s2.reset(b);
  Vector ba = s2.observe(a);
  CHECK(ab != ba);  // permuting observations changes the state
}

TEST_CASE("stacking reset clears prior history") {
  StackingSummarizer s(1, 3);
  Vector a(1);
  a << 1;
  s.reset(a);
  s.observe(a);
  s.observe(a);
  Vector fresh(1);
  fresh << 5;
  s.reset(fresh);
  Vector st = s.current_state();
  CHECK(st(0) == 5.0);
  CHECK(st(1) == 0.0);
  CHECK(st(2) == 0.0);
}

TEST_CASE("lstm summarizer shapes and reset behaviour") {
  LstmSummarizer s(3, 8, 2, 4, 11);
  CHECK(s.state_dim() == 8);
  CHECK(s.learnable());
  REQUIRE(s.parameters() != nullptr);

  Vector obs = Vector::Constant(3, 0.5);
  s.reset(obs);
  Vector st1 = s.current_state();
  REQUIRE(st1.size() == 8);
  // two resets are idempotent
  s.reset(obs);
  CHECK((s.current_state() - st1).cwiseAbs().maxCoeff() == doctest::Approx(0.0));

  s.observe(obs);
  s.observe(obs);
  auto win = s.window();
  REQUIRE(win.has_value());
  CHECK(win->length == 3);
  CHECK(win->observations.rows() == 4);  // padded to history_length
  // window truncates at history_length
  s.observe(obs);
  s.observe(obs);
  CHECK(s.window()->length == 4);
}

// [TRIVIAL] LSTM with zero weights -> zero state
TEST_CASE("zero-weight lstm emits zero state") {
  LstmSummarizer s(2, 4, 1, 4, 3);
  auto& params = *s.parameters();
  for (const auto& name : params.names()) params.at(name).setZero();
  Vector obs = Vector::Constant(2, 1.0);
  s.reset(obs);
  CHECK(s.current_state().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  s.observe(obs);
  CHECK(s.current_state().cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

// [TRIVIAL] batch of one == sequential summarize
TEST_CASE("summarize_batch matches online stepping") {
  LstmSummarizer s(2, 6, 2, 4, 19);
  Rng rng(5);
  std::uniform_real_distribution<double> dist(-1, 1);
  Vector o0(2), o1(2), o2(2);
  for (auto* o : {&o0, &o1, &o2})
    for (long i = 0; i < 2; ++i) (*o)(i) = dist(rng);
  s.reset(o0);
  s.observe(o1);
  Vector online = s.observe(o2);
  auto win = s.window();
  REQUIRE(win.has_value());

  Tape tape;
  auto p = tape.bind(*s.parameters());
  std::vector<const ObservationWindow*> windows{&*win};
  Var states = s.summarize_batch(tape, p, windows);
  REQUIRE(states.value().rows() == 1);
  REQUIRE(states.value().cols() == 6);
  CHECK((states.value().row(0).transpose() - online).cwiseAbs().maxCoeff() <=
        1e-12);
}

TEST_CASE("summarize_batch handles mixed window lengths") {
  LstmSummarizer s(2, 4, 1, 4, 23);
  Vector a = Vector::Constant(2, 0.3);
  Vector b = Vector::Constant(2, -0.7);

  s.reset(a);
  auto w1 = *s.window();  // length 1
  s.observe(b);
  s.observe(a);
  auto w3 = *s.window();  // length 3
  Vector online3 = s.current_state();
  s.reset(a);
  Vector online1 = s.current_state();

  Tape tape;
  auto p = tape.bind(*s.parameters());
  std::vector<const ObservationWindow*> windows{&w1, &w3};
  Var states = s.summarize_batch(tape, p, windows);
  REQUIRE(states.value().rows() == 2);
  CHECK((states.value().row(0).transpose() - online1).cwiseAbs().maxCoeff() <=
        1e-12);
  CHECK((states.value().row(1).transpose() - online3).cwiseAbs().maxCoeff() <=
        1e-12);
}

// [DERIVED] finite-difference gradcheck through a 4-step unrolled window
TEST_CASE("gradients flow through summarize_batch") {
  LstmSummarizer s(2, 3, 1, 4, 31);
  Rng rng(9);
  s.reset(testutil::random_tensor(2, 1, rng).col(0));
  for (int i = 0; i < 3; ++i) s.observe(testutil::random_tensor(2, 1, rng).col(0));
  auto win = *s.window();
  REQUIRE(win.length == 4);

  auto loss_fn = [&]() {
    Tape tape;
    auto p = tape.bind(*s.parameters());
    std::vector<const ObservationWindow*> windows{&win};
    Var states = s.summarize_batch(tape, p, windows);
    return tape.mean(tape.square(states)).value()(0, 0);
  };

  Tape tape;
  auto p = tape.bind(*s.parameters());
  std::vector<const ObservationWindow*> windows{&win};
  Var states = s.summarize_batch(tape, p, windows);
  Var loss = tape.mean(tape.square(states));
  tape.backward(loss);
  auto analytic = tape.gradients(*s.parameters(), p);
  auto numeric = testutil::finite_difference_gradients(*s.parameters(), loss_fn);
  CHECK(testutil::max_relative_error(analytic, numeric, 1e-5) < 1e-4);

  // loss depends on the state, so LSTM weights must receive nonzero gradient
  double total = 0.0;
  for (const auto& [name, g] : analytic) total += g.cwiseAbs().sum();
  CHECK(total > 0.0);
}
