#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "plls/latent/train.hpp"

namespace plls::inline PLLS_ABI::cli {

// Bad command line or configuration; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PolicyMode { Plls, Ppo };

// One experiment: a base learner configuration plus the conditions and trial
// seeds to run it under. The trial seed drives collection, both VAEs and PPO.
struct RunConfig {
  std::string name;  // condition directories live under <output>/<name>
  PolicyMode mode = PolicyMode::Plls;
  std::vector<latent::AblationMode> ablations{latent::AblationMode::ActionOnly};
  std::vector<std::uint64_t> seeds{0};
  std::optional<std::filesystem::path> output;
  latent::PllsConfig base;
  // Stop a trial once an evaluation beats both; unset means no early stop.
  std::optional<double> stop_return;
  std::optional<double> stop_max_length;
  // Sections present in the file, for warnings about ignored blocks.
  std::vector<std::string> sections;

  /// Learner configuration of one (condition, seed) trial.
  latent::PllsConfig trial(latent::AblationMode ablation, std::uint64_t seed) const;
  /// Throws UsageError naming the offending field.
  void validate() const;
};

const std::vector<std::string>& preset_names();
/// Throws UsageError listing the valid names.
RunConfig preset(const std::string& name);

/// Sectioned key = value text. [run] preset = NAME selects the starting
/// values; every other key overrides one field. Unknown sections or keys are
/// errors.
RunConfig parse_run_config(std::istream& in, const std::string& label = "config");
RunConfig load_run_config(const std::filesystem::path& path);

/// Every field, no preset reference; parsing it back gives the same config.
void write_run_config(std::ostream& out, const RunConfig& config);

std::string policy_mode_name(PolicyMode m);
PolicyMode parse_policy_mode(const std::string& name);

}  // namespace plls::inline PLLS_ABI::cli
