#pragma once

#include <mutex>
#include <optional>
#include <string_view>

#include "plls/ppo/agent.hpp"
#include "plls/vae/vae.hpp"

namespace plls::inline PLLS_ABI::latent {

// Which representation models are real VAEs; the others are identity maps.
enum class AblationMode { Both, StateOnly, ActionOnly, Neither };

std::string_view mode_name(AblationMode mode);
/// Accepts both, state_only, action_only, neither.
AblationMode parse_mode(std::string_view name);
bool uses_state_model(AblationMode mode);
bool uses_action_model(AblationMode mode);

// z = mean of V_s's encoder (or the raw observation), a = V_a's decoder
// output (or e itself). Models are frozen on construction.
class LatentPipeline final : public ppo::Representation {
 public:
  LatentPipeline(std::size_t observation_size, std::size_t action_dim, std::optional<vae::VaeModel> state_model,
                 std::optional<vae::VaeModel> action_model);

  /// Adds exp(log_std) * eps to encoded states; off by default.
  void enable_state_noise(std::uint64_t seed);

  const std::optional<vae::VaeModel>& state_model() const { return state_model_; }
  const std::optional<vae::VaeModel>& action_model() const { return action_model_; }

  std::size_t observation_size() const override { return observation_size_; }
  std::size_t state_dim() const override;
  std::size_t latent_action_dim() const override;
  std::size_t action_dim() const override { return action_dim_; }
  std::vector<Real> encode_states(std::span<const Real> observations, std::size_t n) const override;
  std::vector<Real> decode_actions(std::span<const Real> latent, std::size_t n) const override;

 private:
  std::size_t observation_size_;
  std::size_t action_dim_;
  std::optional<vae::VaeModel> state_model_;
  std::optional<vae::VaeModel> action_model_;
  mutable std::optional<Rng> state_noise_;
  mutable std::mutex noise_mutex_;
};

}  // namespace plls::inline PLLS_ABI::latent
