#include "pearl/agent.hpp"

#include <random>
#include <sstream>

namespace pearl {
namespace {

constexpr std::uint64_t kSampleStreamSalt = 0x9e3779b97f4a7c15ULL;

// Padded slot representations with unavailable rows zeroed: masks, not
// padding, carry the availability semantics downstream.
Tensor padded_reprs(const ActionRepresentationModule& repr, const DiscreteActionSpace& space) {
  Tensor out = repr.represent_all(space);
  for (long a = 0; a < space.size(); ++a)
    if (!space.available[static_cast<std::size_t>(a)]) out.row(a).setZero();
  return out;
}

}  // namespace

PearlAgent::PearlAgent(std::unique_ptr<PolicyLearner> learner,
                       std::unique_ptr<HistorySummarizer> summarizer, SafetyModule safety,
                       ActionRepresentationModule action_repr, std::size_t buffer_capacity,
                       std::uint64_t seed)
    : learner_(std::move(learner)),
      summarizer_(std::move(summarizer)),
      safety_(std::move(safety)),
      action_repr_(action_repr),
      buffer_(learner_ ? learner_->required_buffer() : BufferKind::FifoOffPolicy, buffer_capacity),
      act_rng_(seed),
      sample_rng_(seed ^ kSampleStreamSalt) {
  if (!learner_) throw UsageError("PearlAgent requires a policy learner");
  if (!summarizer_) summarizer_ = std::make_unique<IdentitySummarizer>(learner_->state_dim());

  if (static_cast<std::size_t>(learner_->batch_size()) > buffer_capacity)
    throw ConfigError("batch size " + std::to_string(learner_->batch_size()) +
                      " exceeds replay buffer capacity " + std::to_string(buffer_capacity));

  auto violations = validate_composition(*learner_, summarizer_.get(), safety_);
  if (!violations.empty()) {
    std::ostringstream msg;
    for (std::size_t i = 0; i < violations.size(); ++i)
      msg << (i ? "; " : "") << violations[i];
    throw IncompatibleModulesError(msg.str());
  }

  learner_->set_summarizer(summarizer_.get());
  learner_->set_safety(&safety_);
}

std::vector<std::string> PearlAgent::validate_composition(const PolicyLearner& learner,
                                                          const HistorySummarizer* summarizer,
                                                          const SafetyModule& safety,
                                                          std::optional<bool> env_discrete) {
  std::vector<std::string> out;
  if (safety.kind == SafetyKind::MeanVariance && !learner.distributional())
    out.push_back(
        "mean-variance safety module requires a distributional policy learner "
        "(the configured learner estimates only expected values)");
  if (safety.kind == SafetyKind::RewardConstrained && learner.discrete())
    out.push_back(
        "reward-constrained safety module requires a continuous actor-critic "
        "policy learner (the configured learner is discrete)");
  if (summarizer && summarizer->state_dim() != learner.state_dim())
    out.push_back("history summarizer state dim " + std::to_string(summarizer->state_dim()) +
                  " does not match policy learner state dim " +
                  std::to_string(learner.state_dim()));
  if (env_discrete && *env_discrete != learner.discrete())
    out.push_back(std::string("policy learner expects a ") +
                  (learner.discrete() ? "discrete" : "continuous (box)") +
                  " action space but the environment provides a " +
                  (*env_discrete ? "discrete" : "continuous (box)") + " one");
  return out;
}

void PearlAgent::reset(const Vector& observation, const ActionSpace& space) {
  if (is_discrete(space) != learner_->discrete())
    throw IncompatibleModulesError(
        validate_composition(*learner_, nullptr, SafetyModule::none(), is_discrete(space))
            .front());
  summarizer_->reset(observation);
  state_ = summarizer_->current_state();
  space_ = space;
  was_reset_ = true;
  pending_act_ = false;
  learner_->on_episode_start(act_rng_);
}

DiscreteActionSpace PearlAgent::filtered_space() const {
  DiscreteActionSpace filtered = safety_.apply_filter(state_, as_discrete(space_));
  if (filtered.available_count() == 0)
    throw SafetyError("safety filter left no available actions");
  return filtered;
}

Action PearlAgent::act(bool exploit) {
  if (!was_reset_) throw ContractError("agent.act called before reset");

  act_state_ = state_;
  act_window_ = summarizer_->window();
  if (learner_->discrete()) {
    const DiscreteActionSpace filtered = filtered_space();
    act_reprs_ = padded_reprs(action_repr_, filtered);
    act_mask_ = filtered.mask_row();
    const long index = learner_->act_discrete(state_, act_reprs_, act_mask_, exploit, act_rng_);
    if (index < 0 || index >= filtered.size() ||
        !filtered.available[static_cast<std::size_t>(index)])
      throw SafetyError("learner chose an action outside the filtered space");
    act_action_.index = index;
    act_action_.repr = act_reprs_.row(index).transpose();
  } else {
    act_reprs_ = Tensor();
    act_mask_ = Tensor();
    act_action_.index = -1;
    act_action_.repr = learner_->act_box(state_, as_box(space_), exploit, act_rng_);
  }
  act_log_prob_ = learner_->last_log_prob();
  pending_act_ = true;
  return act_action_;
}

void PearlAgent::observe(const ActionResult& result) {
  if (!pending_act_) throw ContractError("agent.observe called without a preceding act");
  if (result.observation.size() != summarizer_->observation_dim())
    throw ContractError("observation width changed mid-run: expected " +
                        std::to_string(summarizer_->observation_dim()) + ", got " +
                        std::to_string(result.observation.size()));

  Transition t;
  t.state = act_state_;
  t.action_repr = act_action_.repr;
  t.action_index = act_action_.index;
  t.reward = result.reward;
  t.cost = result.cost;
  t.terminated = result.terminated;
  t.truncated = result.truncated;
  t.state_window = act_window_;
  t.log_prob = act_log_prob_;

  t.next_state = summarizer_->observe(result.observation);
  t.next_state_window = summarizer_->window();

  if (learner_->discrete()) {
    const DiscreteActionSpace next_space =
        result.available_action_space ? *result.available_action_space : as_discrete(space_);
    t.curr_available_actions = act_reprs_;
    t.curr_mask = act_mask_;
    t.next_available_actions = padded_reprs(action_repr_, next_space);
    t.next_mask = next_space.mask_row();
    if (result.available_action_space) space_ = *result.available_action_space;
  }

  const long ensemble = learner_->ensemble_size();
  if (ensemble > 1) {
    std::bernoulli_distribution coin(0.5);
    t.bootstrap_mask.resize(static_cast<std::size_t>(ensemble));
    for (auto& bit : t.bootstrap_mask) bit = coin(sample_rng_) ? 1 : 0;
  }

  buffer_.push(std::move(t));
  if (result.done()) buffer_.end_episode();

  state_ = summarizer_->current_state();
  pending_act_ = false;
}

LossReport PearlAgent::learn() { return learner_->learn(buffer_, sample_rng_); }

std::vector<double> online_learning_loop(PearlAgent& agent, Environment& env, long num_episodes,
                                         bool learn, bool exploit, bool learn_after_episode) {
  std::vector<double> returns;
  returns.reserve(static_cast<std::size_t>(num_episodes));
  for (long episode = 0; episode < num_episodes; ++episode) {
    auto [observation, space] = env.reset();
    agent.reset(observation, space);
    double episodic_return = 0.0;
    bool done = false;
    while (!done) {
      const Action action = agent.act(exploit);
      const ActionResult result = env.step(action);
      episodic_return += result.reward;
      agent.observe(result);
      if (learn && !learn_after_episode) agent.learn();
      done = result.done();
    }
    if (learn && learn_after_episode) agent.learn();
    returns.push_back(episodic_return);
  }
  return returns;
}

}  // namespace pearl
