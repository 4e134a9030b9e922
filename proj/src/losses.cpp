#include "pearl/losses.hpp"

namespace pearl {

Vector quantile_midpoints(long n) {
  if (n < 1) throw UsageError("quantile_midpoints: n must be >= 1");
  Vector tau(n);
  for (long i = 0; i < n; ++i) tau(i) = (2.0 * (i + 1) - 1.0) / (2.0 * n);
  return tau;
}

Var quantile_huber_loss(Tape& tape, Var pred, const Tensor& target, double kappa) {
  long b = pred.rows(), n = pred.cols(), m = target.cols();
  if (target.rows() != b) throw DimensionError("quantile_huber_loss: batch mismatch");
  if (n < 1 || m < 1) throw DimensionError("quantile_huber_loss: need N, M >= 1");
  Vector tau = quantile_midpoints(n);
  Var total = tape.constant(0.0);
  Tensor ones = Tensor::Ones(b, n);
  for (long j = 0; j < m; ++j) {
    Tensor tcol = target.col(j).replicate(1, n);
    Var u = tape.sub(tape.constant(tcol), pred);
    // |tau_i - 1{u<0}| is flat a.e.; treated as a constant weight.
    Tensor w(b, n);
    const Tensor& uv = u.value();
    for (long r = 0; r < b; ++r)
      for (long i = 0; i < n; ++i) w(r, i) = std::abs(tau(i) - (uv(r, i) < 0.0 ? 1.0 : 0.0));
    total = tape.add(total, tape.sum(tape.mul(tape.constant(w), tape.huber(u, kappa))));
  }
  return tape.scale(total, 1.0 / static_cast<double>(b * n * m));
}

Var expectile_loss(Tape& tape, Var pred, const Tensor& target, double tau) {
  if (target.rows() != pred.rows() || target.cols() != pred.cols())
    throw DimensionError("expectile_loss: shape mismatch");
  Var u = tape.sub(tape.constant(target), pred);
  Tensor w(u.rows(), u.cols());
  const Tensor& uv = u.value();
  for (long r = 0; r < w.rows(); ++r)
    for (long c = 0; c < w.cols(); ++c) w(r, c) = std::abs(tau - (uv(r, c) < 0.0 ? 1.0 : 0.0));
  return tape.mean(tape.mul(tape.constant(w), tape.square(u)));
}

}  // namespace pearl
