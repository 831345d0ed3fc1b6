#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "plls/cli/run_config.hpp"

// Subcommand bodies. Results go to `out`, warnings and progress to `err`.
// Configuration problems throw UsageError; anything else is a runtime failure.
namespace plls::inline PLLS_ABI::cli {

/// Root for run directories: the explicit value, else $PLLS_OUTPUT_ROOT, else "runs".
std::filesystem::path output_root(const std::optional<std::filesystem::path>& explicit_root);

struct CollectArgs {
  std::string env = "mountaincar";
  std::size_t resolution = 64;
  std::size_t episodes = 12;
  std::size_t max_len = 0;  // 0: the environment's step limit
  std::uint64_t seed = 0;
  std::filesystem::path out;
};
void cmd_collect(const CollectArgs& args, std::ostream& out);

struct TrainVaeArgs {
  std::string kind;  // state | action
  std::filesystem::path data;
  std::optional<std::filesystem::path> config;  // else the preset for the data's environment
  std::filesystem::path out;
  std::uint64_t seed = 0;
};
/// Writes the checkpoint at `out` and the loss curve next to it as <stem>_loss.csv.
void cmd_train_vae(const TrainVaeArgs& args, std::ostream& out, std::ostream& err);

struct TrainPolicyArgs {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> preset;
  std::optional<std::string> mode;
  std::optional<std::string> ablation;  // comma-separated conditions
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::filesystem::path> output;
  bool resume = false;
};

/// The run configuration the arguments describe, validated.
RunConfig resolve_run_config(const TrainPolicyArgs& args, std::ostream& err);
std::filesystem::path experiment_dir(const RunConfig& config);
std::filesystem::path trial_dir(const RunConfig& config, latent::AblationMode ablation, std::uint64_t seed);

/// Runs every (condition, seed) trial under <root>/<name>/<condition>/seed<k>
/// and writes each condition's curves.csv once all its seeds are done.
void cmd_train_policy(const TrainPolicyArgs& args, std::ostream& out, std::ostream& err);

struct EvalArgs {
  std::filesystem::path run;
  std::size_t episodes = 10;
  std::optional<std::uint64_t> seed;  // default: disjoint from the training-time evaluations
};
ppo::EvalRecord cmd_eval(const EvalArgs& args, std::ostream& out);

struct ExploreArgs {
  std::string mode;  // multi-step | one-step | neighbors
  std::filesystem::path vae;
  std::filesystem::path out;  // directory
  std::size_t n = 1000;
  std::uint64_t seed = 0;
};
void cmd_explore(const ExploreArgs& args, std::ostream& out);

struct ReportArgs {
  std::vector<std::filesystem::path> runs;
  std::optional<std::filesystem::path> ablation;  // experiment directory with condition subdirectories
  std::vector<std::string> efficiency;            // config paths or preset names
  std::optional<std::filesystem::path> out;
};
void cmd_report(const ReportArgs& args, std::ostream& out);

}  // namespace plls::inline PLLS_ABI::cli
