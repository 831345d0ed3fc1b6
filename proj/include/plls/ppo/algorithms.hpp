#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "plls/nn/adam.hpp"
#include "plls/ppo/actor_critic.hpp"
#include "plls/ppo/config.hpp"
#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::ppo {

/// R(h) = sum_t gamma^(t-1) r_t, accumulated in double.
double returns(std::span<const Real> rewards, double gamma);

struct GaeResult {
  std::vector<Real> advantages;
  std::vector<Real> targets;  // advantages + values
};

/// One trajectory segment: delta_t = r_t + gamma v_{t+1} (1 - done_t) - v_t,
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, with v_T = bootstrap.
GaeResult gae(std::span<const Real> rewards, std::span<const Real> values, std::span<const std::uint8_t> dones,
              Real bootstrap, Real gamma, Real lambda);

/// In place: mean 0, population std 1; the std is floored at 1e-8.
void normalize_advantages(std::span<Real> advantages);
inline constexpr double kAdvantageStdFloor = 1e-8;

/// Per-sample surrogate min(rho A, clip(rho, 1 - eps, 1 + eps) A).
Real clipped_surrogate(Real ratio, Real advantage, Real clip);

// Rows of a PPO batch. inputs [n x input_dim], latent_actions [n x action_dim].
struct Minibatch {
  std::size_t size = 0;
  std::vector<Real> inputs;
  std::vector<Real> latent_actions;
  std::vector<Real> old_log_probs;
  std::vector<Real> advantages;
  std::vector<Real> targets;
  // Source transition of each row; reported when a ratio is non-finite.
  std::vector<std::size_t> rows;
};

struct PpoLoss {
  Tensor total;
  Tensor policy;   // -mean clipped surrogate
  Tensor value;    // mean squared error to the targets
  Tensor entropy;  // mean policy entropy
  double approx_kl = 0;      // mean(log pi_old - log pi_new)
  double clip_fraction = 0;  // share of rows with |rho - 1| > eps
};

/// total = policy + c1 value - c2 entropy. Throws ContractError naming the
/// transition whose importance ratio is not finite.
PpoLoss ppo_loss(const ActorCritic& model, const Minibatch& batch, const PpoConfig& config);

struct UpdateStats {
  double policy_loss = 0;
  double value_loss = 0;
  double entropy = 0;
  double approx_kl = 0;
  double clip_fraction = 0;
  std::size_t minibatches = 0;
};

/// Full PPO batch, advantages already normalized.
struct Batch {
  std::size_t size = 0;
  std::size_t input_dim = 0;
  std::size_t action_dim = 0;
  std::vector<Real> inputs;
  std::vector<Real> latent_actions;
  std::vector<Real> old_log_probs;
  std::vector<Real> advantages;
  std::vector<Real> targets;

  Minibatch gather(std::span<const std::size_t> rows) const;
};

/// n_epochs passes over `rng`-shuffled minibatches with one Adam step each;
/// returns the mean statistics over every minibatch.
UpdateStats ppo_update(ActorCritic& model, nn::Adam& optimizer, const Batch& batch, const PpoConfig& config,
                       Rng& rng);

}  // namespace plls::inline PLLS_ABI::ppo
