#pragma once

#include <optional>

#include "pearl/action_space.hpp"
#include "pearl/tensor.hpp"

namespace pearl {

// What the environment hands back after a step.
struct ActionResult {
  Vector observation;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  std::optional<double> cost;
  std::optional<DiscreteActionSpace> available_action_space;

  bool done() const { return terminated || truncated; }
};

// A window of recent raw observations, newest last; kept in transitions so a
// learnable summarizer (LSTM) can be re-run under its current parameters.
struct ObservationWindow {
  Tensor observations;  // length x obs_dim
  long length = 0;
};

// One interaction record. Padded action slots hold zero representations;
// the masks carry the availability semantics.
struct Transition {
  Vector state;
  Vector action_repr;
  long action_index = -1;
  double reward = 0.0;
  std::optional<double> cost;
  Vector next_state;
  bool terminated = false;
  bool truncated = false;

  // Discrete dynamics only; empty for continuous actions.
  Tensor curr_available_actions;  // A x repr_dim, zero-padded
  Tensor curr_mask;               // 1 x A
  Tensor next_available_actions;
  Tensor next_mask;

  std::optional<ObservationWindow> state_window;
  std::optional<ObservationWindow> next_state_window;

  // On-policy extras.
  std::optional<double> log_prob;       // behavior log-prob at act time (PPO)
  std::optional<long> next_action_index;  // filled at episode end (SARSA)

  // Bootstrapped-ensemble membership bits, assigned at push time.
  std::vector<std::uint8_t> bootstrap_mask;
};

}  // namespace pearl
