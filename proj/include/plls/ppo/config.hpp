#pragma once

#include <cstdint>
#include <limits>

#include "plls/descriptor.hpp"
#include "plls/tensor/tensor.hpp"

namespace plls::inline PLLS_ABI::ppo {

struct PpoConfig {
  std::size_t horizon = 512;
  Real learning_rate = Real(4e-4);
  std::size_t n_epochs = 10;
  std::size_t minibatch_size = 128;
  std::size_t n_envs = 32;
  Real gamma = Real(0.99);
  Real lambda = Real(0.95);
  Real clip = Real(0.2);
  Real vf_coeff = Real(0.5);
  Real entropy_coeff = Real(0.01);
  // Rewards are multiplied by this before GAE and value targets; reported
  // returns stay unscaled.
  Real reward_scale = 1;
  // Global gradient-norm cap per minibatch step; 0 disables.
  Real max_grad_norm = Real(0.5);
  std::size_t total_iterations = 2000;
  std::uint64_t seed = 0;

  std::size_t eval_interval = 10;
  std::size_t eval_episodes = 10;
  std::size_t save_interval = 50;
  // Stop once the evaluation mean exceeds this; NaN never stops early.
  double target_return = std::numeric_limits<double>::quiet_NaN();

  std::size_t batch_size() const { return horizon * n_envs; }
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  Descriptor descriptor() const;
  static PpoConfig from_descriptor(const Descriptor& d);

  /// MountainCar table, latent-space learner.
  static PpoConfig mountaincar_plls();
  /// MountainCar baseline: same table with learning rate 3e-4.
  static PpoConfig mountaincar_ppo();
  /// Pixel racing table.
  static PpoConfig pixelracer();
};

}  // namespace plls::inline PLLS_ABI::ppo
