#pragma once

#include <span>
#include <vector>

#include "plls/envs/env.hpp"
#include "plls/ppo/actor_critic.hpp"
#include "plls/rng.hpp"
#include "plls/rollout/collect.hpp"

namespace plls::inline PLLS_ABI::ppo {

// Fixed maps around the policy: observations -> policy inputs z and latent
// actions e -> executable actions. Implementations are read-only.
class Representation {
 public:
  virtual ~Representation() = default;
  virtual std::size_t observation_size() const = 0;
  virtual std::size_t state_dim() const = 0;
  virtual std::size_t latent_action_dim() const = 0;
  virtual std::size_t action_dim() const = 0;
  /// [n x observation_size] -> [n x state_dim].
  virtual std::vector<Real> encode_states(std::span<const Real> observations, std::size_t n) const = 0;
  /// [n x latent_action_dim] -> [n x action_dim], before clamping to the box.
  virtual std::vector<Real> decode_actions(std::span<const Real> latent, std::size_t n) const = 0;
};

// Plain PPO: the policy sees raw observations and emits raw actions.
class IdentityRepresentation final : public Representation {
 public:
  IdentityRepresentation(std::size_t observation_size, std::size_t action_dim)
      : observation_size_(observation_size), action_dim_(action_dim) {}
  std::size_t observation_size() const override { return observation_size_; }
  std::size_t state_dim() const override { return observation_size_; }
  std::size_t latent_action_dim() const override { return action_dim_; }
  std::size_t action_dim() const override { return action_dim_; }
  std::vector<Real> encode_states(std::span<const Real> observations, std::size_t) const override {
    return {observations.begin(), observations.end()};
  }
  std::vector<Real> decode_actions(std::span<const Real> latent, std::size_t) const override {
    return {latent.begin(), latent.end()};
  }

 private:
  std::size_t observation_size_;
  std::size_t action_dim_;
};

// z = encode(s); (mu, sigma) = pi(z); e = mu + sigma eps when stochastic, mu
// otherwise; a = clamp(decode(e)). log_probs are log pi(e | z).
class PolicyActor final : public rollout::Actor {
 public:
  PolicyActor(const ActorCritic& model, const Representation& representation, envs::Box box, bool stochastic,
              std::uint64_t seed);

  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  std::size_t input_dim() const override { return representation_.state_dim(); }
  std::size_t latent_action_dim() const override { return representation_.latent_action_dim(); }
  rollout::ActBatch act(std::span<const Real> observations, std::size_t n) override;
  std::vector<Real> value(std::span<const Real> observations, std::size_t n) override;

 private:
  const ActorCritic& model_;
  const Representation& representation_;
  envs::Box box_;
  bool stochastic_;
  Rng rng_;
};

/// Throws DimensionError unless the model sits between the representation's
/// state and latent action spaces and the representation fits the env.
void check_compatible(const ActorCritic& model, const Representation& representation, const envs::Env& env);

}  // namespace plls::inline PLLS_ABI::ppo
