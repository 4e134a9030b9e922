#pragma once

#include <deque>
#include <vector>

#include "pearl/transition.hpp"

namespace pearl {

enum class BufferKind { FifoOffPolicy, FifoOnPolicy, Episodic };

// Bounded transition store with oldest-first eviction. Storage grows lazily;
// nothing is allocated up front. The episodic variant tracks episode
// boundaries and only ever returns whole episodes.
class ReplayBuffer {
 public:
  ReplayBuffer(BufferKind kind, std::size_t capacity);

  BufferKind kind() const { return kind_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return transitions_.size(); }

  void push(Transition t);
  // Marks the episode boundary (episodic/on-policy bookkeeping). For the
  // episodic kind this also backfills next_action_index within the episode.
  void end_episode();

  // Uniform sample without replacement within one call. Requires size() >=
  // batch_size for off-policy use; callers guard.
  std::vector<const Transition*> sample(std::size_t batch_size, Rng& rng) const;

  // Completed episodes, oldest first. Empty when none are complete.
  std::vector<std::vector<const Transition*>> completed_episodes() const;
  bool has_completed_episode() const { return !episodes_.empty(); }

  // On-policy consumption: drop everything gathered so far.
  void clear();

  const Transition& at(std::size_t i) const { return transitions_[i]; }

 private:
  struct Span {
    std::size_t start;
    std::size_t end;  // one past the last transition
  };

  void evict_one();

  BufferKind kind_;
  std::size_t capacity_;
  std::deque<Transition> transitions_;
  std::deque<Span> episodes_;  // completed episodes, front-relative indices
  std::size_t open_start_ = 0;  // where the in-progress episode begins
};

}  // namespace pearl
