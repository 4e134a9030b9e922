#include "pearl/replay_buffer.hpp"

#include <algorithm>

namespace pearl {

ReplayBuffer::ReplayBuffer(BufferKind kind, std::size_t capacity)
    : kind_(kind), capacity_(capacity) {
  if (capacity_ == 0) throw ConfigError("replay buffer capacity must be positive");
}

void ReplayBuffer::evict_one() {
  transitions_.pop_front();
  // An episode whose first transition was evicted is no longer whole.
  while (!episodes_.empty() && episodes_.front().start == 0) episodes_.pop_front();
  for (auto& e : episodes_) {
    --e.start;
    --e.end;
  }
  if (open_start_ > 0) --open_start_;
}

void ReplayBuffer::push(Transition t) {
  if (transitions_.size() == capacity_) evict_one();
  transitions_.push_back(std::move(t));
}

void ReplayBuffer::end_episode() {
  std::size_t end = transitions_.size();
  std::size_t start = episodes_.empty() ? open_start_ : std::max(open_start_, episodes_.back().end);
  if (end <= start) return;
  if (kind_ == BufferKind::Episodic)
    for (std::size_t i = start; i + 1 < end; ++i)
      transitions_[i].next_action_index = transitions_[i + 1].action_index;
  episodes_.push_back(Span{start, end});
  open_start_ = end;
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (batch_size > transitions_.size())
    throw UsageError("sample: batch size exceeds buffer contents");
  // Partial Fisher-Yates over an index vector.
  std::vector<std::size_t> idx(transitions_.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<const Transition*> out;
  out.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
    out.push_back(&transitions_[idx[i]]);
  }
  return out;
}

std::vector<std::vector<const Transition*>> ReplayBuffer::completed_episodes() const {
  std::vector<std::vector<const Transition*>> out;
  for (const Span& s : episodes_) {
    std::vector<const Transition*> ep;
    for (std::size_t i = s.start; i < s.end; ++i) ep.push_back(&transitions_[i]);
    out.push_back(std::move(ep));
  }
  return out;
}

void ReplayBuffer::clear() {
  transitions_.clear();
  episodes_.clear();
  open_start_ = 0;
}

}  // namespace pearl
