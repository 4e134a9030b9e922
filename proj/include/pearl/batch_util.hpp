#pragma once

#include <functional>

#include "pearl/transition.hpp"

namespace pearl {

// Dense batch views over transition pointers, shared by the learners.

inline Tensor stack_states(const std::vector<const Transition*>& batch, bool next) {
  const long b = static_cast<long>(batch.size());
  const long dim = batch[0]->state.size();
  Tensor out(b, dim);
  for (long i = 0; i < b; ++i) {
    const auto& t = *batch[static_cast<std::size_t>(i)];
    out.row(i) = (next ? t.next_state : t.state).transpose();
  }
  return out;
}

inline Tensor stack_masks(const std::vector<const Transition*>& batch, bool next) {
  const long b = static_cast<long>(batch.size());
  const Tensor& first = next ? batch[0]->next_mask : batch[0]->curr_mask;
  Tensor out(b, first.cols());
  for (long i = 0; i < b; ++i) {
    const auto& t = *batch[static_cast<std::size_t>(i)];
    out.row(i) = (next ? t.next_mask : t.curr_mask).row(0);
  }
  return out;
}

inline std::function<Tensor(long)> batch_slot_reprs(const std::vector<const Transition*>& batch,
                                                    bool next) {
  return [&batch, next](long slot) {
    const long b = static_cast<long>(batch.size());
    const Tensor& first =
        next ? batch[0]->next_available_actions : batch[0]->curr_available_actions;
    Tensor out(b, first.cols());
    for (long i = 0; i < b; ++i) {
      const auto& t = *batch[static_cast<std::size_t>(i)];
      out.row(i) = (next ? t.next_available_actions : t.curr_available_actions).row(slot);
    }
    return out;
  };
}

inline Tensor stack_taken_reprs(const std::vector<const Transition*>& batch) {
  const long b = static_cast<long>(batch.size());
  Tensor out(b, batch[0]->action_repr.size());
  for (long i = 0; i < b; ++i)
    out.row(i) = batch[static_cast<std::size_t>(i)]->action_repr.transpose();
  return out;
}

inline Tensor taken_onehot(const std::vector<const Transition*>& batch, long num_slots) {
  Tensor out = Tensor::Zero(static_cast<long>(batch.size()), num_slots);
  for (long i = 0; i < out.rows(); ++i) out(i, batch[static_cast<std::size_t>(i)]->action_index) = 1.0;
  return out;
}

}  // namespace pearl
