#pragma once

#include <filesystem>
#include <optional>

#include "plls/descriptor.hpp"
#include "plls/nn/gaussian.hpp"
#include "plls/nn/layers.hpp"

namespace plls::inline PLLS_ABI::ppo {

struct ActorCriticConfig {
  std::size_t input_dim = 2;
  // Pixel trunk: inputs are flattened [C x R x R] images run through this
  // conv stack before the dense layers.
  std::optional<nn::ConvStackShape> conv;
  std::vector<std::size_t> hidden{128, 64};
  nn::Activation hidden_activation = nn::Activation::Tanh;
  std::size_t action_dim = 1;
  Real init_log_std = 0;
  // Gain of the policy mean layer's init; small keeps the initial policy near
  // the latent prior mean.
  Real mean_init_scale = Real(0.01);
  // Fixed affine map (x - offset) * scale applied to inputs; empty = identity.
  std::vector<Real> input_offset;
  std::vector<Real> input_scale;
  std::uint64_t seed = 0;

  void validate() const;
  Descriptor descriptor() const;
  static ActorCriticConfig from_descriptor(const Descriptor& d);
};

// Shared trunk feeding a diagonal Gaussian policy head with a
// state-independent log_std vector and a scalar value head.
class ActorCritic {
 public:
  explicit ActorCritic(ActorCriticConfig config);

  struct Output {
    nn::GaussianParams policy;  // [batch x action_dim] each
    Tensor value;               // [batch]
  };

  const ActorCriticConfig& config() const { return config_; }
  std::size_t input_dim() const { return config_.input_dim; }
  std::size_t action_dim() const { return config_.action_dim; }

  /// inputs: [batch x input_dim].
  Output forward(const Tensor& inputs) const;

  std::vector<Tensor> parameters() const;
  nn::ParamCount param_count() const;
  Tensor& log_std() { return log_std_; }
  const Tensor& log_std() const { return log_std_; }

  void save(const std::filesystem::path& path) const;
  static ActorCritic load(const std::filesystem::path& path);
  /// Copies parameter values (not graph state) from a same-shaped model.
  void copy_from(const ActorCritic& other);

 private:
  ActorCriticConfig config_;
  std::vector<nn::ConvLayer> conv_;
  nn::Mlp trunk_;
  nn::DenseLayer mean_head_;
  Tensor log_std_;
  nn::DenseLayer value_head_;
};

}  // namespace plls::inline PLLS_ABI::ppo
