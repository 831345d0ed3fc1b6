#pragma once

#include <span>

#include "plls/tensor/ops.hpp"

namespace plls::inline PLLS_ABI::nn {

// Diagonal Gaussian, parameterized by log standard deviation so that
// std = exp(log_std) stays positive without constraints. Both tensors are
// either [d] or [batch x d] with identical shape.
struct GaussianParams {
  Tensor mean;
  Tensor log_std;

  std::size_t dim() const { return mean.shape().back(); }
};

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

/// sum_i [-0.5((x_i - mu_i)/sigma_i)^2 - log sigma_i - 0.5 log 2pi]; a scalar
/// for [d] inputs, a [batch] vector for [batch x d] inputs.
Tensor gaussian_log_prob(const GaussianParams& params, const Tensor& x);

/// sum_i (log sigma_i + 0.5 log(2 pi e)), same shape convention.
Tensor gaussian_entropy(const GaussianParams& params);

/// Graph-free evaluation for rollouts.
Real gaussian_log_prob(std::span<const Real> mean, std::span<const Real> log_std, std::span<const Real> x);

}  // namespace plls::inline PLLS_ABI::nn
