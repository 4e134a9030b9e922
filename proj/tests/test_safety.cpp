#include <doctest.h>

#include <cmath>

#include "pearl/safety.hpp"

using namespace pearl;

// [TRIVIAL]/[DERIVED] mean-variance examples from the risk objective
TEST_CASE("mean variance q") {
  ReturnDistribution dist;
  dist.quantiles = Tensor(2, 2);
  dist.quantiles << 3, 3,  // constant -> Q = c for any beta
      0, 2;                // mean 1, population variance 1

  Vector q0 = mean_variance_q(dist, 0.0);
  CHECK(q0(0) == doctest::Approx(3.0));
  CHECK(q0(1) == doctest::Approx(1.0));  // beta=0 -> mean

  Vector q1 = mean_variance_q(dist, 1.0);
  CHECK(q1(0) == doctest::Approx(3.0));
  CHECK(q1(1) == doctest::Approx(0.0));  // 1 - 1*1

  // monotone decreasing in beta when variance > 0
  Vector q2 = mean_variance_q(dist, 2.0);
  CHECK(q2(1) < q1(1));
  CHECK(q2(0) == doctest::Approx(3.0));
}

// [PAPER] argmax flip at beta=0.5 over arms (6,1) and (10,9)
TEST_CASE("mean variance bandit optimum flips at half") {
  ReturnDistribution dist;  // quantiles chosen to hit mean/variance exactly
  dist.quantiles = Tensor(2, 2);
  dist.quantiles << 5, 7,  // mean 6, var 1
      7, 13;               // mean 10, var 9
  for (double beta : {0.0, 0.1, 0.49}) {
    Vector q = mean_variance_q(dist, beta);
    CHECK(q(1) > q(0));  // risk-tolerant prefers arm 2
  }
  for (double beta : {0.51, 1.0, 5.0}) {
    Vector q = mean_variance_q(dist, beta);
    CHECK(q(0) > q(1));  // risk-averse prefers arm 1
  }
  Vector qc = mean_variance_q(dist, 0.5);
  CHECK(qc(0) == doctest::Approx(qc(1)));  // indifferent exactly at 0.5
}

// [DERIVED] r=1, cost=2, lambda=0.5 -> 0
TEST_CASE("rcpo penalized reward") {
  CHECK(rcpo_penalized_reward(1.0, 2.0, 0.5) == doctest::Approx(0.0));
  CHECK(rcpo_penalized_reward(3.0, 2.0, 0.0) == doctest::Approx(3.0));
  CHECK(rcpo_penalized_reward(3.0, 0.0, 7.0) == doctest::Approx(3.0));
  CHECK_THROWS_AS(rcpo_penalized_reward(1.0, std::nullopt, 0.5), ConfigError);
}

// [DERIVED] dual projection arithmetic
TEST_CASE("rcpo lambda update") {
  CHECK(rcpo_lambda_update(0.0, 0.2, 0.3, 0.1) == doctest::Approx(0.0));
  CHECK(rcpo_lambda_update(0.0, 0.5, 0.3, 0.1) == doctest::Approx(0.02));
  // never negative
  CHECK(rcpo_lambda_update(0.05, 0.0, 10.0, 1.0) == doctest::Approx(0.0));
  // decreases toward zero when satisfied, increases when violated
  CHECK(rcpo_lambda_update(0.5, 0.1, 0.3, 0.1) < 0.5);
  CHECK(rcpo_lambda_update(0.5, 0.9, 0.3, 0.1) > 0.5);
  CHECK_THROWS_AS(rcpo_lambda_update(0.0, std::nan(""), 0.3, 0.1), TrainingError);
}

TEST_CASE("filter_action applies the predicate to the mask") {
  auto space = DiscreteActionSpace::indexed(3);
  Vector state = Vector::Zero(1);

  // [TRIVIAL] always-true predicate -> unchanged
  auto same = filter_action([](const Vector&, long, const Vector&) { return true; }, state, space);
  CHECK(same.available_count() == 3);

  // [TRIVIAL] block action 0 of 3 -> mask [false,true,true]
  auto blocked = filter_action(
      [](const Vector&, long a, const Vector&) { return a != 0; }, state, space);
  CHECK(blocked.available[0] == 0);
  CHECK(blocked.available[1] == 1);
  CHECK(blocked.available[2] == 1);
  // representations unchanged
  CHECK(blocked.representations == space.representations);

  // [DERIVED] composed with dynamic availability: env allows {0,1}, filter blocks 1
  auto dyn = space;
  dyn.available = {1, 1, 0};
  auto composed = filter_action(
      [](const Vector&, long a, const Vector&) { return a != 1; }, state, dyn);
  CHECK(composed.available[0] == 1);
  CHECK(composed.available[1] == 0);
  CHECK(composed.available[2] == 0);  // never re-enables
}

TEST_CASE("safety module construction and filter passthrough") {
  auto mv = SafetyModule::mean_variance(0.2);
  CHECK(mv.kind == SafetyKind::MeanVariance);
  CHECK(mv.beta == doctest::Approx(0.2));
  CHECK_THROWS_AS(SafetyModule::mean_variance(-0.1), ConfigError);

  auto f = SafetyModule::filter([](const Vector&, long a, const Vector&) { return a == 1; });
  auto space = DiscreteActionSpace::indexed(2);
  auto filtered = f.apply_filter(Vector::Zero(1), space);
  CHECK(filtered.available_count() == 1);
  // non-filter module leaves the space alone
  CHECK(mv.apply_filter(Vector::Zero(1), space).available_count() == 2);
}

// [DERIVED] single-state chain with c=1, gamma=0.9 -> cost value -> 10, J -> 1
TEST_CASE("cost critic learns the discounted cost-to-go") {
  OptimizerConfig opt;
  opt.kind = OptimizerKind::Adam;
  opt.lr = 5e-3;
  CostCritic critic(1, 1, {16}, opt, 0.9, 0.05);

  Transition t;
  t.state = Vector::Zero(1);
  t.action_repr = Vector::Zero(1);
  t.reward = 0.0;
  t.cost = 1.0;
  t.next_state = Vector::Zero(1);
  std::vector<Transition> batch(8, t);
  Tensor next_actions = Tensor::Zero(8, 1);

  double loss = 0.0;
  for (int i = 0; i < 4000; ++i) loss = critic.update(batch, next_actions);
  CHECK(loss < 1e-2);
  const double v = critic.value(t.state, t.action_repr);
  CHECK(v == doctest::Approx(10.0).epsilon(0.05));
  CHECK(critic.estimate_normalized_cost(batch) == doctest::Approx(1.0).epsilon(0.05));
}

// [TRIVIAL] all costs zero -> critic converges to zero
TEST_CASE("cost critic with zero costs goes to zero") {
  OptimizerConfig opt;
  opt.kind = OptimizerKind::Adam;
  opt.lr = 5e-3;
  CostCritic critic(1, 1, {8}, opt, 0.9, 0.05);

  Transition t;
  t.state = Vector::Zero(1);
  t.action_repr = Vector::Zero(1);
  t.cost = 0.0;
  t.next_state = Vector::Zero(1);
  std::vector<Transition> batch(4, t);
  Tensor next_actions = Tensor::Zero(4, 1);
  double loss = 1.0;
  for (int i = 0; i < 1500; ++i) loss = critic.update(batch, next_actions);
  CHECK(loss < 1e-4);
  CHECK(std::abs(critic.value(t.state, t.action_repr)) < 0.05);

  Transition no_cost = t;
  no_cost.cost.reset();
  std::vector<Transition> bad{no_cost};
  CHECK_THROWS_AS(critic.update(bad, Tensor::Zero(1, 1)), ConfigError);
}
