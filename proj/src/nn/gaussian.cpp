#include "plls/nn/gaussian.hpp"

#include <cmath>

namespace plls::inline PLLS_ABI::nn {

namespace {

void check(const GaussianParams& p, const Tensor* x) {
  if (!p.mean.defined() || !p.log_std.defined() || p.mean.shape() != p.log_std.shape()) {
    throw DimensionError("gaussian: mean and log_std shapes differ");
  }
  if (x && x->shape() != p.mean.shape()) {
    throw DimensionError("gaussian: sample " + shape_string(x->shape()) + " vs params " +
                         shape_string(p.mean.shape()));
  }
  if (p.mean.rank() != 1 && p.mean.rank() != 2) throw DimensionError("gaussian: expected rank 1 or 2");
}

Tensor reduce_last(const Tensor& t) { return t.rank() == 1 ? sum(t) : sum_rows(t); }

}  // namespace

Tensor gaussian_log_prob(const GaussianParams& params, const Tensor& x) {
  check(params, &x);
  const Tensor standardized = mul(sub(x, params.mean), exp(scale(params.log_std, Real{-1})));
  const Tensor per_dim = add_scalar(sub(scale(square(standardized), Real{-0.5}), params.log_std),
                                    static_cast<Real>(-kLogSqrtTwoPi));
  return reduce_last(per_dim);
}

Tensor gaussian_entropy(const GaussianParams& params) {
  check(params, nullptr);
  return reduce_last(add_scalar(params.log_std, static_cast<Real>(0.5 + kLogSqrtTwoPi)));
}

Real gaussian_log_prob(std::span<const Real> mean, std::span<const Real> log_std, std::span<const Real> x) {
  if (mean.size() != log_std.size() || mean.size() != x.size()) {
    throw DimensionError("gaussian_log_prob: size mismatch");
  }
  double total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double z = (static_cast<double>(x[i]) - mean[i]) * std::exp(-static_cast<double>(log_std[i]));
    total += -0.5 * z * z - log_std[i] - kLogSqrtTwoPi;
  }
  return static_cast<Real>(total);
}

}  // namespace plls::inline PLLS_ABI::nn
