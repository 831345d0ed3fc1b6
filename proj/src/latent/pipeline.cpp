#include "plls/latent/pipeline.hpp"

#include <cmath>

namespace plls::inline PLLS_ABI::latent {

std::string_view mode_name(AblationMode mode) {
  switch (mode) {
    case AblationMode::Both: return "both";
    case AblationMode::StateOnly: return "state_only";
    case AblationMode::ActionOnly: return "action_only";
    case AblationMode::Neither: return "neither";
  }
  return "?";
}

AblationMode parse_mode(std::string_view name) {
  for (auto m : {AblationMode::Both, AblationMode::StateOnly, AblationMode::ActionOnly, AblationMode::Neither}) {
    if (mode_name(m) == name) return m;
  }
  throw std::invalid_argument("unknown ablation mode '" + std::string(name) +
                              "' (expected both, state_only, action_only, neither)");
}

bool uses_state_model(AblationMode mode) { return mode == AblationMode::Both || mode == AblationMode::StateOnly; }
bool uses_action_model(AblationMode mode) { return mode == AblationMode::Both || mode == AblationMode::ActionOnly; }

LatentPipeline::LatentPipeline(std::size_t observation_size, std::size_t action_dim,
                               std::optional<vae::VaeModel> state_model, std::optional<vae::VaeModel> action_model)
    : observation_size_(observation_size),
      action_dim_(action_dim),
      state_model_(std::move(state_model)),
      action_model_(std::move(action_model)) {
  if (state_model_) {
    state_model_->set_trainable(false);
    const std::size_t in = shape_numel(state_model_->config().sample_shape());
    if (in != observation_size_) {
      throw DimensionError("state VAE takes " + std::to_string(in) + " features, observations have " +
                           std::to_string(observation_size_));
    }
  }
  if (action_model_) {
    action_model_->set_trainable(false);
    const std::size_t out = shape_numel(action_model_->config().sample_shape());
    if (out != action_dim_) {
      throw DimensionError("action VAE decodes " + std::to_string(out) + " dims, the action box has " +
                           std::to_string(action_dim_));
    }
  }
}

void LatentPipeline::enable_state_noise(std::uint64_t seed) { state_noise_.emplace(seed); }

std::size_t LatentPipeline::state_dim() const {
  return state_model_ ? state_model_->latent_dim() : observation_size_;
}

std::size_t LatentPipeline::latent_action_dim() const {
  return action_model_ ? action_model_->latent_dim() : action_dim_;
}

std::vector<Real> LatentPipeline::encode_states(std::span<const Real> observations, std::size_t n) const {
  if (observations.size() != n * observation_size_) {
    throw DimensionError("encode_states: expected " + std::to_string(n * observation_size_) + " values, got " +
                         std::to_string(observations.size()));
  }
  if (!state_model_) return {observations.begin(), observations.end()};
  autograd::NoGradGuard no_grad;
  Shape shape{n};
  for (std::size_t d : state_model_->config().sample_shape()) shape.push_back(d);
  const auto params = state_model_->encode(Tensor(shape, std::vector<Real>(observations.begin(), observations.end())));
  std::vector<Real> z(params.mean.data().begin(), params.mean.data().end());
  if (state_noise_) {
    std::lock_guard lock(noise_mutex_);
    const auto log_std = params.log_std.data();
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += std::exp(log_std[i]) * state_noise_->normal();
  }
  for (std::size_t i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z[i])) throw ContractError("state encoder produced a non-finite latent at index " + std::to_string(i));
  }
  return z;
}

std::vector<Real> LatentPipeline::decode_actions(std::span<const Real> latent, std::size_t n) const {
  const std::size_t ed = latent_action_dim();
  if (latent.size() != n * ed) {
    throw DimensionError("decode_actions: expected " + std::to_string(n * ed) + " values, got " +
                         std::to_string(latent.size()));
  }
  if (!action_model_) return {latent.begin(), latent.end()};
  autograd::NoGradGuard no_grad;
  const Tensor a = action_model_->decode(Tensor(Shape{n, ed}, std::vector<Real>(latent.begin(), latent.end())));
  std::vector<Real> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) throw ContractError("action decoder produced a non-finite action at index " + std::to_string(i));
  }
  return out;
}

}  // namespace plls::inline PLLS_ABI::latent
