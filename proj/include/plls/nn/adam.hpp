#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "plls/tensor/tensor.hpp"

namespace plls::inline PLLS_ABI::nn {

struct AdamHyper {
  Real learning_rate = Real(1e-3);
  Real beta1 = Real(0.9);
  Real beta2 = Real(0.999);
  Real epsilon = Real(1e-8);
};

struct AdamState {
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;
  std::uint64_t step_count = 0;
};

/// One bias-corrected Adam update of every parameter from its gradient
/// buffer (a parameter without a gradient is treated as having zero gradient).
/// Moment buffers are created on the first call.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamHyper& hyper);

/// Rescales all gradients together so their global L2 norm is at most
/// max_norm; returns the norm before scaling.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamHyper hyper);

  void step() { adam_step(params_, state_, hyper_); }
  void zero_grad();
  std::span<Tensor> params() { return params_; }
  const AdamState& state() const { return state_; }
  AdamState& state() { return state_; }
  AdamHyper& hyper() { return hyper_; }

 private:
  std::vector<Tensor> params_;
  AdamState state_;
  AdamHyper hyper_;
};

}  // namespace plls::inline PLLS_ABI::nn
