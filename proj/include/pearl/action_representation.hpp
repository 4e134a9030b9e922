#pragma once

#include <cmath>

#include "pearl/action_space.hpp"

namespace pearl {

enum class ActionReprKind { Identity, OneHot, Binary };

inline long binary_code_width(long max_actions) {
  if (max_actions <= 1) return 1;
  long bits = 0;
  long span = 1;
  while (span < max_actions) {
    span <<= 1;
    ++bits;
  }
  return bits;  // ceil(log2(max_actions))
}

// Maps action indices to the representation vectors a learner consumes.
struct ActionRepresentationModule {
  ActionReprKind kind = ActionReprKind::Identity;
  long max_actions = 0;

  long dim(const DiscreteActionSpace& space) const {
    switch (kind) {
      case ActionReprKind::Identity: return space.repr_dim();
      case ActionReprKind::OneHot: return max_actions;
      case ActionReprKind::Binary: return binary_code_width(max_actions);
    }
    throw UsageError("unknown action representation kind");
  }

  Vector represent(long index, const DiscreteActionSpace& space) const {
    if (index < 0 || (max_actions > 0 && index >= max_actions) || index >= space.size())
      throw UsageError("action index out of range: " + std::to_string(index));
    switch (kind) {
      case ActionReprKind::Identity:
        return space.representations.row(index).transpose();
      case ActionReprKind::OneHot: {
        Vector v = Vector::Zero(max_actions);
        v(index) = 1.0;
        return v;
      }
      case ActionReprKind::Binary: {
        long bits = binary_code_width(max_actions);
        Vector v(bits);
        for (long b = 0; b < bits; ++b)  // most-significant bit first
          v(b) = (index >> (bits - 1 - b)) & 1 ? 1.0 : 0.0;
        return v;
      }
    }
    throw UsageError("unknown action representation kind");
  }

  // All slots of a space as a padded matrix (unavailable slots keep their
  // representations; masking is the caller's concern).
  Tensor represent_all(const DiscreteActionSpace& space) const {
    Tensor out(space.size(), dim(space));
    for (long a = 0; a < space.size(); ++a) out.row(a) = represent(a, space).transpose();
    return out;
  }
};

}  // namespace pearl
