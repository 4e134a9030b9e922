#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "pearl/action_space.hpp"
#include "pearl/exploration.hpp"
#include "pearl/history.hpp"
#include "pearl/replay_buffer.hpp"
#include "pearl/safety.hpp"

namespace pearl {

// Per-learn-call diagnostics: named loss values plus the number of gradient
// updates actually performed (0 when the learner had nothing to train on).
struct LossReport {
  std::map<std::string, double> values;
  long updates = 0;

  bool empty() const { return updates == 0; }
};

// Common contract for all policy learners. A learner owns its exploration
// module; the agent routes act/learn calls and supplies shared modules
// (history summarizer, safety) after construction.
class PolicyLearner {
 public:
  virtual ~PolicyLearner() = default;

  // Discrete action selection over padded slot representations + mask.
  virtual long act_discrete(const SubjectiveState& /*state*/, const Tensor& /*action_reprs*/,
                            const Tensor& /*mask_row*/, bool /*exploit*/, Rng& /*rng*/) {
    throw IncompatibleModulesError("learner does not support discrete action spaces");
  }
  virtual Vector act_box(const SubjectiveState& /*state*/, const BoxActionSpace& /*space*/,
                         bool /*exploit*/, Rng& /*rng*/) {
    throw IncompatibleModulesError("learner does not support continuous action spaces");
  }

  virtual LossReport learn(ReplayBuffer& buffer, Rng& rng) = 0;
  virtual void on_episode_start(Rng& /*rng*/) {}

  virtual bool discrete() const = 0;
  virtual bool distributional() const { return false; }
  virtual BufferKind required_buffer() const { return BufferKind::FifoOffPolicy; }
  virtual long state_dim() const = 0;
  virtual long batch_size() const = 0;

  virtual ParameterSet& parameters() = 0;
  virtual ExplorationModule* exploration() { return nullptr; }

  // Shared modules injected by the agent.
  virtual void set_summarizer(HistorySummarizer* /*summarizer*/) {}
  virtual void set_safety(SafetyModule* /*safety*/) {}

  // Behavior log-prob of the most recent act (on-policy learners).
  virtual std::optional<double> last_log_prob() const { return std::nullopt; }
  // Bootstrapped ensembles: number of per-transition mask bits to draw.
  virtual long ensemble_size() const { return 1; }
};

}  // namespace pearl
