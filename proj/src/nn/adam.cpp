#include "plls/nn/adam.hpp"

#include <algorithm>
#include <cmath>

namespace plls::inline PLLS_ABI::nn {

void adam_step(std::span<Tensor> params, AdamState& state, const AdamHyper& hyper) {
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.numel(), Real{0});
      state.second_moment.emplace_back(p.numel(), Real{0});
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw DimensionError("adam: state tracks " + std::to_string(state.first_moment.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const Real correction1 = static_cast<Real>(1.0 - std::pow(static_cast<double>(hyper.beta1), t));
  const Real correction2 = static_cast<Real>(1.0 - std::pow(static_cast<double>(hyper.beta2), t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    auto value = params[i].data();
    if (m.size() != value.size()) throw DimensionError("adam: moment buffer shape changed");
    const auto grad = params[i].grad();
    if (grad.empty()) continue;
    for (std::size_t j = 0; j < value.size(); ++j) {
      const Real g = grad[j];
      m[j] = hyper.beta1 * m[j] + (1 - hyper.beta1) * g;
      v[j] = hyper.beta2 * v[j] + (1 - hyper.beta2) * g * g;
      const Real m_hat = m[j] / correction1;
      const Real v_hat = v[j] / correction2;
      value[j] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
}

Adam::Adam(std::vector<Tensor> params, AdamHyper hyper) : params_(std::move(params)), hyper_(hyper) {}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sum = 0;
  for (const auto& p : params) {
    for (Real g : p.grad()) sum += double(g) * double(g);
  }
  const double norm = std::sqrt(sum);
  if (norm > max_norm) {
    const Real scale = static_cast<Real>(max_norm / norm);
    for (auto& p : params) {
      for (Real& g : p.grad()) g *= scale;
    }
  }
  return norm;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

}  // namespace plls::inline PLLS_ABI::nn
