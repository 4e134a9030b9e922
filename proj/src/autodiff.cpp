#include "pearl/autodiff.hpp"

#include <cmath>

namespace pearl {

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }

int Tape::push(Tensor value, bool requires_grad, std::function<void()> backprop) {
  nodes_.push_back(Node{std::move(value), Tensor(), requires_grad, std::move(backprop)});
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Tape::grad_buf(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  return Var(this, push(std::move(value), requires_grad, nullptr));
}

Tape::Params Tape::bind(const ParameterSet& params) {
  Params out;
  for (const auto& name : params.names())
    out.vars_.emplace(name, leaf(params.at(name), params.trainable(name)));
  return out;
}

GradientMap Tape::gradients(const ParameterSet& params, const Params& handles) const {
  GradientMap out;
  for (const auto& name : params.names()) {
    if (!params.trainable(name)) continue;
    Var v = handles[name];
    const Tensor& g = nodes_[v.id()].grad;
    if (g.size() == 0)
      out[name] = Tensor::Zero(params.at(name).rows(), params.at(name).cols());
    else
      out[name] = g;
  }
  return out;
}

void Tape::check_same(Var a, Var b, const char* op) const {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()));
}

namespace {
bool needs(const Var& v) { return true; }
}  // namespace

#define UNARY_OP(name, fwd, bwd)                                               \
  Var Tape::name(Var a) {                                                      \
    const Tensor& x = a.value();                                               \
    Tensor y = fwd;                                                            \
    int aid = a.id();                                                          \
    bool rg = nodes_[aid].requires_grad;                                       \
    int id = push(std::move(y), rg, nullptr);                                  \
    if (rg)                                                                    \
      nodes_[id].backprop = [this, id, aid]() {                                \
        const Tensor& g = nodes_[id].grad;                                     \
        const Tensor& x = nodes_[aid].value;                                   \
        const Tensor& y = nodes_[id].value;                                    \
        (void)x;                                                               \
        (void)y;                                                               \
        grad_buf(aid).array() += bwd;                                          \
      };                                                                       \
    return Var(this, id);                                                      \
  }

UNARY_OP(relu, (x.array().max(0.0)).matrix(), g.array() * (x.array() > 0.0).cast<double>())
UNARY_OP(tanh, x.array().tanh().matrix(), g.array() * (1.0 - y.array().square()))
UNARY_OP(sigmoid, (1.0 / (1.0 + (-x.array()).exp())).matrix(),
         g.array() * y.array() * (1.0 - y.array()))
UNARY_OP(exp, x.array().exp().matrix(), g.array() * y.array())
UNARY_OP(log, x.array().log().matrix(), g.array() / x.array())
UNARY_OP(square, x.array().square().matrix(), g.array() * 2.0 * x.array())
UNARY_OP(sqrt, x.array().sqrt().matrix(), g.array() * 0.5 / y.array())
UNARY_OP(neg, (-x.array()).matrix(), -g.array())

#undef UNARY_OP

Var Tape::scale(Var a, double c) {
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push(a.value() * c, rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, c]() { grad_buf(aid) += nodes_[id].grad * c; };
  return Var(this, id);
}

Var Tape::add_scalar(Var a, double c) {
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push((a.value().array() + c).matrix(), rg, nullptr);
  if (rg) nodes_[id].backprop = [this, id, aid]() { grad_buf(aid) += nodes_[id].grad; };
  return Var(this, id);
}

Var Tape::add(Var a, Var b) {
  check_same(a, b, "add");
  int aid = a.id(), bid = b.id();
  bool rg = nodes_[aid].requires_grad || nodes_[bid].requires_grad;
  int id = push(a.value() + b.value(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, bid]() {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[aid].requires_grad) grad_buf(aid) += g;
      if (nodes_[bid].requires_grad) grad_buf(bid) += g;
    };
  return Var(this, id);
}

Var Tape::sub(Var a, Var b) {
  check_same(a, b, "sub");
  int aid = a.id(), bid = b.id();
  bool rg = nodes_[aid].requires_grad || nodes_[bid].requires_grad;
  int id = push(a.value() - b.value(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, bid]() {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[aid].requires_grad) grad_buf(aid) += g;
      if (nodes_[bid].requires_grad) grad_buf(bid) -= g;
    };
  return Var(this, id);
}

Var Tape::mul(Var a, Var b) {
  check_same(a, b, "mul");
  int aid = a.id(), bid = b.id();
  bool rg = nodes_[aid].requires_grad || nodes_[bid].requires_grad;
  int id = push((a.value().array() * b.value().array()).matrix(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, bid]() {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[aid].requires_grad)
        grad_buf(aid).array() += g.array() * nodes_[bid].value.array();
      if (nodes_[bid].requires_grad)
        grad_buf(bid).array() += g.array() * nodes_[aid].value.array();
    };
  return Var(this, id);
}

Var Tape::matmul(Var a, Var b) {
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions " + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()));
  int aid = a.id(), bid = b.id();
  bool rg = nodes_[aid].requires_grad || nodes_[bid].requires_grad;
  int id = push(a.value() * b.value(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, bid]() {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[aid].requires_grad) grad_buf(aid).noalias() += g * nodes_[bid].value.transpose();
      if (nodes_[bid].requires_grad) grad_buf(bid).noalias() += nodes_[aid].value.transpose() * g;
    };
  return Var(this, id);
}

Var Tape::transpose(Var a) {
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push(a.value().transpose(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid]() { grad_buf(aid) += nodes_[id].grad.transpose(); };
  return Var(this, id);
}

Var Tape::add_rowvec(Var m, Var row) {
  if (row.rows() != 1 || row.cols() != m.cols())
    throw DimensionError("add_rowvec: expected 1x" + std::to_string(m.cols()));
  int mid = m.id(), rid = row.id();
  bool rg = nodes_[mid].requires_grad || nodes_[rid].requires_grad;
  Tensor y = m.value();
  y.rowwise() += row.value().row(0);
  int id = push(std::move(y), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, mid, rid]() {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[mid].requires_grad) grad_buf(mid) += g;
      if (nodes_[rid].requires_grad) grad_buf(rid) += g.colwise().sum();
    };
  return Var(this, id);
}

Var Tape::mul_colvec(Var m, Var col) {
  if (col.cols() != 1 || col.rows() != m.rows())
    throw DimensionError("mul_colvec: expected " + std::to_string(m.rows()) + "x1");
  int mid = m.id(), cid = col.id();
  bool rg = nodes_[mid].requires_grad || nodes_[cid].requires_grad;
  Tensor y = m.value().array().colwise() * col.value().col(0).array();
  int id = push(std::move(y), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, mid, cid]() {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[mid].requires_grad)
        grad_buf(mid).array() += g.array().colwise() * nodes_[cid].value.col(0).array();
      if (nodes_[cid].requires_grad)
        grad_buf(cid).col(0) += (g.array() * nodes_[mid].value.array()).rowwise().sum().matrix();
    };
  return Var(this, id);
}

Var Tape::clamp(Var a, double lo, double hi) {
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push(a.value().array().max(lo).min(hi).matrix(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, lo, hi]() {
      const Tensor& g = nodes_[id].grad;
      const auto& x = nodes_[aid].value.array();
      grad_buf(aid).array() += g.array() * ((x >= lo) && (x <= hi)).cast<double>();
    };
  return Var(this, id);
}

Var Tape::abs(Var a) {
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push(a.value().array().abs().matrix(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid]() {
      const Tensor& g = nodes_[id].grad;
      grad_buf(aid).array() += g.array() * nodes_[aid].value.array().sign();
    };
  return Var(this, id);
}

Var Tape::huber(Var a, double kappa) {
  if (kappa <= 0.0) throw UsageError("huber: kappa must be positive");
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  const auto& x = a.value().array();
  Tensor y = ((x.abs() <= kappa)
                  .select(0.5 * x.square(), kappa * (x.abs() - 0.5 * kappa)))
                 .matrix();
  int id = push(std::move(y), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, kappa]() {
      const Tensor& g = nodes_[id].grad;
      const auto& x = nodes_[aid].value.array();
      Eigen::ArrayXXd dydx = (x.abs() <= kappa).select(x, kappa * x.sign());
      grad_buf(aid).array() += g.array() * dydx;
    };
  return Var(this, id);
}

Var Tape::min(Var a, Var b) {
  check_same(a, b, "min");
  int aid = a.id(), bid = b.id();
  bool rg = nodes_[aid].requires_grad || nodes_[bid].requires_grad;
  int id = push(a.value().array().min(b.value().array()).matrix(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, bid]() {
      const Tensor& g = nodes_[id].grad;
      Eigen::ArrayXXd take_a =
          (nodes_[aid].value.array() <= nodes_[bid].value.array()).cast<double>();
      if (nodes_[aid].requires_grad) grad_buf(aid).array() += g.array() * take_a;
      if (nodes_[bid].requires_grad) grad_buf(bid).array() += g.array() * (1.0 - take_a);
    };
  return Var(this, id);
}

Var Tape::sum(Var a) {
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push(Tensor::Constant(1, 1, a.value().sum()), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid]() {
      grad_buf(aid).array() += nodes_[id].grad(0, 0);
    };
  return Var(this, id);
}

Var Tape::mean(Var a) {
  double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var Tape::row_sum(Var a) {
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push(a.value().rowwise().sum(), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid]() {
      grad_buf(aid).array().colwise() += nodes_[id].grad.col(0).array();
    };
  return Var(this, id);
}

Var Tape::concat_cols(Var a, Var b) {
  if (a.rows() != b.rows()) throw DimensionError("concat_cols: row mismatch");
  int aid = a.id(), bid = b.id();
  bool rg = nodes_[aid].requires_grad || nodes_[bid].requires_grad;
  Tensor y(a.rows(), a.cols() + b.cols());
  y << a.value(), b.value();
  long ac = a.cols();
  int id = push(std::move(y), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, bid, ac]() {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[aid].requires_grad) grad_buf(aid) += g.leftCols(ac);
      if (nodes_[bid].requires_grad) grad_buf(bid) += g.rightCols(g.cols() - ac);
    };
  return Var(this, id);
}

Var Tape::slice_cols(Var a, long start, long n) {
  if (start < 0 || start + n > a.cols()) throw DimensionError("slice_cols out of range");
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push(a.value().middleCols(start, n), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, start, n]() {
      grad_buf(aid).middleCols(start, n) += nodes_[id].grad;
    };
  return Var(this, id);
}

Var Tape::concat_rows(Var a, Var b) {
  if (a.cols() != b.cols()) throw DimensionError("concat_rows: col mismatch");
  int aid = a.id(), bid = b.id();
  bool rg = nodes_[aid].requires_grad || nodes_[bid].requires_grad;
  Tensor y(a.rows() + b.rows(), a.cols());
  y << a.value(), b.value();
  long ar = a.rows();
  int id = push(std::move(y), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, bid, ar]() {
      const Tensor& g = nodes_[id].grad;
      if (nodes_[aid].requires_grad) grad_buf(aid) += g.topRows(ar);
      if (nodes_[bid].requires_grad) grad_buf(bid) += g.bottomRows(g.rows() - ar);
    };
  return Var(this, id);
}

Var Tape::slice_rows(Var a, long start, long n) {
  if (start < 0 || start + n > a.rows()) throw DimensionError("slice_rows out of range");
  int aid = a.id();
  bool rg = nodes_[aid].requires_grad;
  int id = push(a.value().middleRows(start, n), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, aid, start, n]() {
      grad_buf(aid).middleRows(start, n) += nodes_[id].grad;
    };
  return Var(this, id);
}

Var Tape::stopgrad(Var a) { return constant(a.value()); }

Var Tape::masked_softmax(Var logits, const Tensor& mask) {
  if (mask.rows() != logits.rows() || mask.cols() != logits.cols())
    throw DimensionError("masked_softmax: mask shape mismatch");
  const Tensor& z = logits.value();
  Tensor p = Tensor::Zero(z.rows(), z.cols());
  for (long i = 0; i < z.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (long j = 0; j < z.cols(); ++j)
      if (mask(i, j) != 0.0 && z(i, j) > mx) mx = z(i, j);
    if (!std::isfinite(mx)) throw ContractError("masked_softmax: row has no available entries");
    double denom = 0.0;
    for (long j = 0; j < z.cols(); ++j)
      if (mask(i, j) != 0.0) {
        p(i, j) = std::exp(z(i, j) - mx);
        denom += p(i, j);
      }
    p.row(i) /= denom;
  }
  int zid = logits.id();
  bool rg = nodes_[zid].requires_grad;
  int id = push(std::move(p), rg, nullptr);
  if (rg)
    nodes_[id].backprop = [this, id, zid]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& p = nodes_[id].value;
      // dL/dz = p .* (g - rowdot(g, p)); masked entries have p == 0.
      Eigen::VectorXd dot = (g.array() * p.array()).rowwise().sum();
      grad_buf(zid).array() += p.array() * (g.array().colwise() - dot.array());
    };
  return Var(this, id);
}

Var Tape::masked_logsumexp(Var logits, const Tensor& mask) {
  if (mask.rows() != logits.rows() || mask.cols() != logits.cols())
    throw DimensionError("masked_logsumexp: mask shape mismatch");
  const Tensor& z = logits.value();
  Tensor out(z.rows(), 1);
  for (long i = 0; i < z.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (long j = 0; j < z.cols(); ++j)
      if (mask(i, j) != 0.0 && z(i, j) > mx) mx = z(i, j);
    if (!std::isfinite(mx)) throw ContractError("masked_logsumexp: row has no available entries");
    double s = 0.0;
    for (long j = 0; j < z.cols(); ++j)
      if (mask(i, j) != 0.0) s += std::exp(z(i, j) - mx);
    out(i, 0) = mx + std::log(s);
  }
  int zid = logits.id();
  bool rg = nodes_[zid].requires_grad;
  int id = push(std::move(out), rg, nullptr);
  if (rg) {
    Tensor m = mask;
    nodes_[id].backprop = [this, id, zid, m]() {
      const Tensor& g = nodes_[id].grad;
      const Tensor& z = nodes_[zid].value;
      const Tensor& lse = nodes_[id].value;
      Tensor& gz = grad_buf(zid);
      for (long i = 0; i < z.rows(); ++i)
        for (long j = 0; j < z.cols(); ++j)
          if (m(i, j) != 0.0) gz(i, j) += g(i, 0) * std::exp(z(i, j) - lse(i, 0));
    };
  }
  return Var(this, id);
}

void Tape::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw UsageError("backward: root must be a scalar (1x1)");
  if (!nodes_[root.id()].requires_grad)
    throw UsageError("backward: root does not depend on any trainable leaf");
  grad_buf(root.id())(0, 0) = 1.0;
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (n.backprop && n.grad.size() != 0) n.backprop();
  }
}

}  // namespace pearl
