#pragma once

#include <variant>
#include <vector>

#include "pearl/tensor.hpp"

namespace pearl {

// Discrete action set with per-step availability and per-action
// representation vectors (one row per action).
struct DiscreteActionSpace {
  Tensor representations;            // A x repr_dim
  std::vector<std::uint8_t> available;  // length A

  DiscreteActionSpace() = default;
  explicit DiscreteActionSpace(Tensor reprs)
      : representations(std::move(reprs)),
        available(static_cast<std::size_t>(representations.rows()), 1) {
    if (representations.rows() < 1) throw UsageError("action space must have >= 1 action");
  }

  // A-action space with index representations [0], [1], ...
  static DiscreteActionSpace indexed(long num_actions) {
    Tensor reprs(num_actions, 1);
    for (long a = 0; a < num_actions; ++a) reprs(a, 0) = static_cast<double>(a);
    return DiscreteActionSpace(std::move(reprs));
  }

  long size() const { return representations.rows(); }
  long repr_dim() const { return representations.cols(); }

  long available_count() const {
    long n = 0;
    for (auto a : available) n += a != 0;
    return n;
  }
  std::vector<long> available_indices() const {
    std::vector<long> out;
    for (long a = 0; a < size(); ++a)
      if (available[a]) out.push_back(a);
    return out;
  }
  Tensor mask_row() const {
    Tensor m(1, size());
    for (long a = 0; a < size(); ++a) m(0, a) = available[a] ? 1.0 : 0.0;
    return m;
  }
};

struct BoxActionSpace {
  Vector low;
  Vector high;

  BoxActionSpace() = default;
  BoxActionSpace(Vector lo, Vector hi) : low(std::move(lo)), high(std::move(hi)) {
    if (low.size() != high.size()) throw UsageError("box bounds size mismatch");
    for (long i = 0; i < low.size(); ++i) {
      if (!(low(i) <= high(i))) throw UsageError("box bounds must satisfy low <= high");
      if (!std::isfinite(low(i)) || !std::isfinite(high(i)))
        throw UsageError("box bounds must be finite");
    }
  }

  long dim() const { return low.size(); }
  Vector clip(const Vector& a) const { return a.cwiseMax(low).cwiseMin(high); }
};

using ActionSpace = std::variant<DiscreteActionSpace, BoxActionSpace>;

inline bool is_discrete(const ActionSpace& s) {
  return std::holds_alternative<DiscreteActionSpace>(s);
}
inline const DiscreteActionSpace& as_discrete(const ActionSpace& s) {
  if (!is_discrete(s)) throw UsageError("expected a discrete action space");
  return std::get<DiscreteActionSpace>(s);
}
inline const BoxActionSpace& as_box(const ActionSpace& s) {
  if (is_discrete(s)) throw UsageError("expected a continuous (box) action space");
  return std::get<BoxActionSpace>(s);
}

// A chosen action: discrete actions carry their index and the representation
// used for learning; continuous actions carry only the vector (index == -1).
struct Action {
  long index = -1;
  Vector repr;

  bool discrete() const { return index >= 0; }
};

}  // namespace pearl
