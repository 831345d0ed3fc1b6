#pragma once

#include <filesystem>
#include <memory>

#include "plls/envs/env.hpp"
#include "plls/vae/samples.hpp"

namespace plls::inline PLLS_ABI::rollout {

// Transitions from random-policy episodes, stored back to back. Observation
// t is the one the action was taken in.
struct Dataset {
  envs::EnvSpec env;
  Shape observation_shape;
  std::size_t action_dim = 0;
  // Pixel observations kept as 8-bit values of scale 1/255.
  bool quantized = false;
  std::vector<Real> observations;
  std::vector<std::uint8_t> frames;
  std::vector<Real> actions;
  std::vector<Real> rewards;
  std::vector<std::uint8_t> dones;

  std::size_t size() const { return rewards.size(); }
  std::size_t observation_size() const { return shape_numel(observation_shape); }
  std::size_t episodes() const;

  std::shared_ptr<vae::SampleSource> action_samples() const;
  std::shared_ptr<vae::SampleSource> observation_samples() const;
};

inline constexpr Real kFrameScale = Real(1) / Real(255);

/// Uniform actions from the action box. Episode i resets with a seed derived
/// from (seed, i) and runs until done or `max_len` steps.
Dataset collect_random(const envs::EnvSpec& spec, std::size_t n_trajectories, std::size_t max_len,
                       std::uint64_t seed, bool quantize_images = true);

std::vector<std::uint8_t> encode_dataset(const Dataset& data);
Dataset decode_dataset(std::vector<std::uint8_t> bytes, const std::string& label = "dataset");
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace plls::inline PLLS_ABI::rollout
