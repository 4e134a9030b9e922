#pragma once

#include <Eigen/Dense>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pearl {

// All tensors in this library are dense 2-D double matrices (vectors are
// 1 x n rows). Desk-scale networks make 64-bit precision affordable and keep
// gradient checks tight.
using Tensor = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

using Rng = std::mt19937_64;

struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SafetyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IncompatibleModulesError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline bool all_finite(const Tensor& t) { return t.allFinite(); }

// Named parameter collection. Shapes are fixed once inserted.
class ParameterSet {
 public:
  struct Entry {
    Tensor value;
    bool trainable = true;
  };

  Tensor& add(const std::string& name, Tensor value, bool trainable = true) {
    auto [it, inserted] = entries_.emplace(name, Entry{std::move(value), trainable});
    if (!inserted) throw UsageError("duplicate parameter name: " + name);
    order_.push_back(name);
    return it->second.value;
  }

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
    return it->second.value;
  }
  const Tensor& at(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw UsageError("unknown parameter: " + name);
    return it->second.value;
  }
  bool trainable(const std::string& name) const { return entries_.at(name).trainable; }

  // Insertion order, so iteration (and serialization) is deterministic.
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return entries_.size(); }

  void copy_values_from(const ParameterSet& other) {
    for (const auto& name : order_) {
      const Tensor& src = other.at(name);
      Tensor& dst = at(name);
      if (src.rows() != dst.rows() || src.cols() != dst.cols())
        throw UsageError("parameter shape mismatch: " + name);
      dst = src;
    }
  }

 private:
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

using GradientMap = std::map<std::string, Tensor>;

}  // namespace pearl
