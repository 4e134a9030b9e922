#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pearl/action_representation.hpp"
#include "pearl/environments.hpp"
#include "pearl/policy_learner.hpp"

namespace pearl {

// The Pearl agent: wires a policy learner (which owns its exploration
// module), a history summarizer, a safety module, an action representation
// module, and a replay buffer into the act/observe/learn/reset lifecycle.
// Single-threaded; the CLI parallelizes by running whole replicas.
class PearlAgent {
 public:
  // The replay buffer kind is dictated by the learner; only its capacity is
  // configurable. A null summarizer defaults to identity over the learner's
  // state dimension. Throws ConfigError when batch_size > capacity and
  // IncompatibleModulesError on any composition violation.
  PearlAgent(std::unique_ptr<PolicyLearner> learner,
             std::unique_ptr<HistorySummarizer> summarizer, SafetyModule safety,
             ActionRepresentationModule action_repr, std::size_t buffer_capacity,
             std::uint64_t seed);

  // Composition checks shared with the CLI preflight. Returns every
  // violation, not just the first; `env_discrete` adds the action-space
  // compatibility check when the environment is known.
  static std::vector<std::string> validate_composition(
      const PolicyLearner& learner, const HistorySummarizer* summarizer,
      const SafetyModule& safety, std::optional<bool> env_discrete = std::nullopt);

  void reset(const Vector& observation, const ActionSpace& space);
  Action act(bool exploit = false);
  void observe(const ActionResult& result);
  LossReport learn();

  PolicyLearner& learner() { return *learner_; }
  const PolicyLearner& learner() const { return *learner_; }
  HistorySummarizer& summarizer() { return *summarizer_; }
  SafetyModule& safety() { return safety_; }
  ReplayBuffer& buffer() { return buffer_; }
  const ActionRepresentationModule& action_repr() const { return action_repr_; }
  const SubjectiveState& current_state() const { return state_; }

 private:
  DiscreteActionSpace filtered_space() const;

  std::unique_ptr<PolicyLearner> learner_;
  std::unique_ptr<HistorySummarizer> summarizer_;
  SafetyModule safety_;
  ActionRepresentationModule action_repr_;
  ReplayBuffer buffer_;
  Rng act_rng_;
  Rng sample_rng_;

  ActionSpace space_;
  SubjectiveState state_;
  bool was_reset_ = false;
  bool pending_act_ = false;

  // Captured at act time for the next observe.
  SubjectiveState act_state_;
  Action act_action_;
  Tensor act_reprs_;  // zero-padded slots
  Tensor act_mask_;
  std::optional<double> act_log_prob_;
  std::optional<ObservationWindow> act_window_;
};

// Faithful transcription of the online interaction loop: per episode,
// act/step/observe until done, learning each step or once per episode.
// Returns the undiscounted episodic returns.
std::vector<double> online_learning_loop(PearlAgent& agent, Environment& env,
                                         long num_episodes, bool learn = true,
                                         bool exploit = false,
                                         bool learn_after_episode = false);

}  // namespace pearl
