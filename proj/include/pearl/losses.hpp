#pragma once

#include "pearl/autodiff.hpp"
#include "pearl/tensor.hpp"

namespace pearl {

// Quantile midpoints tau_i = (2i - 1) / (2N), i = 1..N.
Vector quantile_midpoints(long n);

// Quantile regression loss with Huber smoothing: mean over batch, predicted
// quantiles and target samples of |tau_i - 1{u<0}| * Huber_kappa(u) with
// u = target_j - pred_i. Target carries no gradient.
Var quantile_huber_loss(Tape& tape, Var pred, const Tensor& target, double kappa = 1.0);

// Expectile regression loss: mean of |tau - 1{u<0}| * u^2, u = target - pred.
Var expectile_loss(Tape& tape, Var pred, const Tensor& target, double tau);

}  // namespace pearl
