#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "plls/envs/env.hpp"

namespace plls::inline PLLS_ABI::rollout {

// Lockstep vector of environment instances. Finished episodes are reset
// immediately with a seed derived from (seed, env index, episode number), so
// the whole stream is a function of the constructor arguments and actions.
class VecEnv {
 public:
  VecEnv(const envs::EnvSpec& spec, std::size_t n, std::uint64_t seed);

  std::size_t size() const { return envs_.size(); }
  std::size_t observation_size() const { return obs_size_; }
  const envs::Box& action_box() const { return box_; }
  envs::Env& env(std::size_t i) { return *envs_[i]; }
  /// Current observations, [size x observation_size].
  const std::vector<Real>& observations() const { return observations_; }

  struct Step {
    std::vector<Real> rewards;
    std::vector<std::uint8_t> dones;
  };
  /// Steps every instance with its row of `actions` (in parallel).
  Step step(std::span<const Real> actions);

  struct Finished {
    double episode_return = 0;
    std::size_t length = 0;
    bool terminated = false;
  };
  /// Episodes completed since the last call, in completion order.
  std::vector<Finished> take_finished();

  std::vector<std::uint8_t> snapshot() const;
  void restore(const std::vector<std::uint8_t>& bytes);

 private:
  std::uint64_t episode_seed(std::size_t env_index) const;

  std::vector<std::unique_ptr<envs::Env>> envs_;
  envs::Box box_;
  std::size_t obs_size_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Real> observations_;
  std::vector<std::uint64_t> episode_counts_;
  std::vector<double> running_returns_;
  std::vector<std::size_t> running_lengths_;
  std::vector<Finished> finished_;
};

// Batched policy outputs for n observations, row-major.
struct ActBatch {
  std::vector<Real> inputs;          // policy inputs z, [n x input_dim]
  std::vector<Real> latent_actions;  // e, [n x latent_dim]
  std::vector<Real> actions;         // executed actions a, [n x action_dim]
  std::vector<Real> log_probs;       // log pi(e | z), [n]
  std::vector<Real> values;          // [n]
};

class Actor {
 public:
  virtual ~Actor() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t latent_action_dim() const = 0;
  virtual ActBatch act(std::span<const Real> observations, std::size_t n) = 0;
  virtual std::vector<Real> value(std::span<const Real> observations, std::size_t n) = 0;
};

// Transitions of n_envs lockstep environments over `horizon` steps. Row
// env * horizon + t holds step t of environment env.
struct RolloutBatch {
  std::size_t n_envs = 0;
  std::size_t horizon = 0;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  std::size_t action_dim = 0;

  std::vector<Real> inputs;
  std::vector<Real> latent_actions;
  std::vector<Real> actions;
  std::vector<Real> rewards;
  std::vector<std::uint8_t> dones;
  std::vector<Real> log_probs;
  std::vector<Real> values;
  std::vector<Real> bootstrap;  // value of the observation after the last step, per env

  std::vector<VecEnv::Finished> finished;

  std::size_t size() const { return n_envs * horizon; }
};

/// Throws ContractError when the actor returns non-finite values.
RolloutBatch collect_policy(VecEnv& envs, Actor& actor, std::size_t horizon);

struct EvalResult {
  double mean = 0;
  double std = 0;  // population
  std::vector<double> returns;
  std::vector<std::size_t> lengths;
  std::vector<std::uint8_t> reached_goal;
};

/// Runs n_episodes on environments seeded apart from every training stream;
/// `act` must be deterministic for the result to be.
EvalResult evaluate_actor(const envs::EnvSpec& spec, Actor& actor, std::size_t n_episodes, std::uint64_t seed);

/// Seed of the i-th evaluation episode.
std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t episode);

}  // namespace plls::inline PLLS_ABI::rollout
