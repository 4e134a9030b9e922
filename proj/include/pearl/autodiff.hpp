#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pearl/tensor.hpp"

namespace pearl {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  const Tensor& value() const;
  const Tensor& grad() const;
  long rows() const { return value().rows(); }
  long cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Define-by-run reverse-mode tape. A fresh tape is built for every training
// step; backward() walks the recorded ops once, accumulating gradients.
class Tape {
 public:
  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double v) { return constant(Tensor::Constant(1, 1, v)); }

  // Binds every trainable parameter to a leaf node; lookup by name.
  class Params {
   public:
    Var operator[](const std::string& name) const {
      auto it = vars_.find(name);
      if (it == vars_.end()) throw UsageError("parameter not bound on tape: " + name);
      return it->second;
    }

   private:
    friend class Tape;
    std::map<std::string, Var> vars_;
  };
  Params bind(const ParameterSet& params);

  // Collects gradients of bound parameters after backward(); parameters that
  // never entered the graph get zero gradients.
  GradientMap gradients(const ParameterSet& params, const Params& handles) const;

  // --- elementwise / structural ops -------------------------------------
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var neg(Var a);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var add_rowvec(Var m, Var row);  // broadcast a 1 x n row over all rows
  Var mul_colvec(Var m, Var col);  // scale row i by col(i)
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var square(Var a);
  Var sqrt(Var a);
  Var clamp(Var a, double lo, double hi);  // zero gradient outside [lo, hi]
  Var abs(Var a);
  Var huber(Var a, double kappa);  // 0.5 u^2 inside |u| <= kappa, linear tails
  Var min(Var a, Var b);                   // elementwise; ties route to a
  Var sum(Var a);                          // -> 1x1
  Var mean(Var a);                         // -> 1x1
  Var row_sum(Var a);                      // m x n -> m x 1
  Var concat_cols(Var a, Var b);
  Var slice_cols(Var a, long start, long n);
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var a, long start, long n);
  Var stopgrad(Var a);

  // Row-wise softmax restricted to mask != 0 columns; masked entries are
  // exactly zero and receive no gradient. mask shape matches logits.
  Var masked_softmax(Var logits, const Tensor& mask);
  // Row-wise log(sum_a exp(logit_a)) over unmasked columns -> m x 1.
  Var masked_logsumexp(Var logits, const Tensor& mask);

  void backward(Var root);

  const Tensor& value(int id) const { return nodes_[id].value; }
  const Tensor& grad(int id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    std::function<void()> backprop;  // empty for leaves/constants
  };

  int push(Tensor value, bool requires_grad, std::function<void()> backprop);
  Tensor& grad_buf(int id);
  void check_same(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
};

}  // namespace pearl
