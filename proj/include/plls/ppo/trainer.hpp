#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>

#include "plls/envs/env.hpp"
#include "plls/ppo/agent.hpp"
#include "plls/ppo/algorithms.hpp"

namespace plls::inline PLLS_ABI::ppo {

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  // Mean return of episodes finished during this rollout; NaN when none did.
  double mean_return = 0;
  std::size_t episodes = 0;
  UpdateStats update;
};

struct EvalRecord {
  std::size_t iteration = 0;
  double mean_return = 0;
  double std_return = 0;  // population
  double mean_length = 0;
  double goal_rate = 0;  // share of episodes that terminated (reached the goal)
};

struct TrainOptions {
  // Empty: nothing is written. Otherwise metrics.csv, eval.csv,
  // checkpoints/policy_<iteration>.bin, policy.bin and resume.bin.
  std::filesystem::path run_dir;
  bool resume = false;
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(const EvalRecord&)> on_eval;
  // Extra early-stop test applied to every evaluation, alongside
  // config.target_return.
  std::function<bool(const EvalRecord&)> stop_when;
};

struct TrainResult {
  std::vector<IterationRecord> metrics;  // this invocation only
  std::vector<EvalRecord> evals;
  std::size_t iterations = 0;  // last completed iteration
  bool target_reached = false;  // stopped early by target_return or stop_when
};

/// PPO over `representation`: only `model` is updated. Every random stream is
/// derived from config.seed and the iteration number, so a resumed run
/// matches an uninterrupted one bit for bit.
TrainResult train_policy(const envs::EnvSpec& spec, ActorCritic& model, const Representation& representation,
                         const PpoConfig& config, const TrainOptions& options = {});

/// Deterministic-action episodes on evaluation-only seeds.
EvalRecord evaluate_policy(const envs::EnvSpec& spec, const ActorCritic& model, const Representation& representation,
                           std::size_t n_episodes, std::uint64_t seed);

/// Per-env GAE over a rollout lattice, then batch-wide normalization.
Batch make_batch(const rollout::RolloutBatch& rollout, const PpoConfig& config);

void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const IterationRecord& r);
void write_eval_header(std::ostream& out);
void write_eval_row(std::ostream& out, const EvalRecord& r);

}  // namespace plls::inline PLLS_ABI::ppo
