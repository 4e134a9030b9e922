#pragma once

#include <functional>
#include <string>

#include "pearl/tensor.hpp"

namespace pearl::testutil {

// Central finite differences over every trainable parameter entry.
inline GradientMap finite_difference_gradients(
    ParameterSet& params, const std::function<double()>& loss_fn, double h = 1e-5) {
  GradientMap out;
  for (const auto& name : params.names()) {
    if (!params.trainable(name)) continue;
    Tensor& theta = params.at(name);
    Tensor g = Tensor::Zero(theta.rows(), theta.cols());
    for (long i = 0; i < theta.rows(); ++i)
      for (long j = 0; j < theta.cols(); ++j) {
        double orig = theta(i, j);
        theta(i, j) = orig + h;
        double up = loss_fn();
        theta(i, j) = orig - h;
        double down = loss_fn();
        theta(i, j) = orig;
        g(i, j) = (up - down) / (2.0 * h);
      }
    out[name] = g;
  }
  return out;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor)
inline double max_relative_error(const GradientMap& a, const GradientMap& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (const auto& [name, ga] : a) {
    const Tensor& gb = b.at(name);
    for (long i = 0; i < ga.rows(); ++i)
      for (long j = 0; j < ga.cols(); ++j) {
        double denom = std::max({std::abs(ga(i, j)), std::abs(gb(i, j)), floor});
        worst = std::max(worst, std::abs(ga(i, j) - gb(i, j)) / denom);
      }
  }
  return worst;
}

inline Tensor random_tensor(long rows, long cols, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Tensor t(rows, cols);
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) t(i, j) = dist(rng);
  return t;
}

}  // namespace pearl::testutil
