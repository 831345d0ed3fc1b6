#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>

#include "plls/latent/pipeline.hpp"
#include "plls/ppo/trainer.hpp"
#include "plls/rollout/dataset.hpp"

namespace plls::inline PLLS_ABI::latent {

struct PllsConfig {
  envs::EnvSpec env;
  AblationMode mode = AblationMode::ActionOnly;

  // Random-policy collection feeding the representation models.
  std::size_t collect_trajectories = 12;
  std::size_t collect_max_len = 999;
  std::uint64_t collect_seed = 0;
  // Train/test split: an exact count when nonzero, otherwise the fraction.
  std::size_t state_train_count = 0;
  double state_train_fraction = 0.9;
  std::size_t action_train_count = 0;
  double action_train_fraction = 0.9;

  vae::VaeConfig state_vae;
  vae::VaeConfig action_vae;
  // Pretrained representation checkpoints; with pretrain = false they are
  // required for every model the mode uses.
  std::optional<std::filesystem::path> state_checkpoint;
  std::optional<std::filesystem::path> action_checkpoint;
  bool pretrain = true;

  ppo::PpoConfig ppo;
  std::vector<std::size_t> policy_hidden{128, 64};
  Real init_log_std = 0;
  Real mean_init_scale = Real(0.01);
  bool state_noise = false;

  void validate() const;
};

/// MountainCar, action representation only, lr 4e-4 PPO table.
PllsConfig mountaincar_plls();
/// MountainCar plain PPO baseline (mode neither, lr 3e-4).
PllsConfig mountaincar_ppo();
/// PixelRacer with both representations, racing PPO table.
PllsConfig pixelracer_plls(std::size_t resolution = 64);
/// PixelRacer plain PPO baseline: conv trunk trained end to end.
PllsConfig pixelracer_ppo(std::size_t resolution = 64);

vae::VaeConfig mountaincar_action_vae();
vae::VaeConfig pixelracer_state_vae(std::size_t resolution = 64);
vae::VaeConfig pixelracer_action_vae();

/// Policy architecture over the pipeline's spaces. Raw image inputs get the
/// conv trunk; raw low-dimensional inputs get the observation-box normalizer.
ppo::ActorCriticConfig policy_config(const PllsConfig& config, const ppo::Representation& representation,
                                     const envs::Env& env);

enum class RepresentationKind { State, Action };

struct RepresentationFit {
  vae::TrainedVae trained;
  vae::MseStats test_mse;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
};

/// Splits the dataset's observations or actions (an exact train count when
/// nonzero, else the fraction), trains on one part and scores the other.
RepresentationFit fit_representation(const rollout::Dataset& data, RepresentationKind kind,
                                     const vae::VaeConfig& config, std::size_t train_count, double train_fraction,
                                     const vae::EpochCallback& on_epoch = {});

struct TrainedRepresentation {
  std::optional<vae::VaeModel> model;
  std::vector<vae::EpochStats> curve;
  std::optional<vae::MseStats> test_mse;
};

struct PllsRun {
  std::unique_ptr<LatentPipeline> pipeline;
  std::unique_ptr<ppo::ActorCritic> policy;
  TrainedRepresentation state;
  TrainedRepresentation action;
  ppo::TrainResult training;
};

struct PllsOptions {
  std::filesystem::path run_dir;  // empty: keep everything in memory
  bool resume = false;
  std::function<void(const std::string&)> log;
  std::function<void(const ppo::IterationRecord&)> on_iteration;
  std::function<void(const ppo::EvalRecord&)> on_eval;
  std::function<bool(const ppo::EvalRecord&)> stop_when;
};

/// Random collection, V_s and V_a training (as the mode requires), then PPO
/// over the frozen pipeline. Representation checkpoints and loss curves land
/// in run_dir next to the policy artifacts.
PllsRun train_plls(const PllsConfig& config, const PllsOptions& options = {});

/// Builds the pipeline the mode asks for from checkpoints (no training).
std::unique_ptr<LatentPipeline> load_pipeline(const envs::EnvSpec& env, AblationMode mode,
                                              const std::optional<std::filesystem::path>& state_checkpoint,
                                              const std::optional<std::filesystem::path>& action_checkpoint);

}  // namespace plls::inline PLLS_ABI::latent
