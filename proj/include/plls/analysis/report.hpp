#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "plls/nn/layers.hpp"

namespace plls::inline PLLS_ABI::analysis {

// Evaluation returns on an iteration grid.
struct Curve {
  std::vector<std::size_t> iterations;
  std::vector<double> returns;
};

/// Reads the iteration and mean_return columns of a run's eval.csv.
Curve read_eval_curve(const std::filesystem::path& run_dir);

struct Plateau {
  std::size_t index = 0;      // position in the curve
  std::size_t iteration = 0;  // rollout batches consumed
};

/// First point where the window-average return changes by less than
/// `tolerance` relative to the previous window average. A zero previous
/// average never counts as a plateau.
std::optional<Plateau> find_plateau(const Curve& curve, std::size_t window = 10, double tolerance = 0.02);

struct EfficiencyRow {
  std::string model;
  std::size_t total_parameters = 0;
  std::size_t trainable_parameters = 0;
  std::optional<std::size_t> batches_to_convergence;
  std::optional<std::size_t> samples_to_convergence;
};

struct ModelEntry {
  std::string name;
  nn::ParamCount params;
  std::optional<Curve> curve;
  std::size_t batch_size = 0;  // environment steps per rollout batch
};

std::vector<EfficiencyRow> efficiency_report(const std::vector<ModelEntry>& models);

/// model,total_parameters,trainable_parameters,batches_to_convergence,samples_to_convergence
void write_efficiency_csv(std::ostream& out, const std::vector<EfficiencyRow>& rows);

struct AggregateCurve {
  std::vector<std::size_t> iterations;
  std::vector<double> mean;
  std::vector<double> std;  // population
  std::size_t trials = 0;
};

/// Throws std::invalid_argument when grids differ, listing every length.
AggregateCurve aggregate_curves(const std::vector<Curve>& runs);
AggregateCurve aggregate_runs(const std::vector<std::filesystem::path>& run_dirs);

/// A comment line naming the std convention, then iteration,mean_return,std_return.
void write_curves_csv(std::ostream& out, const AggregateCurve& curve);

}  // namespace plls::inline PLLS_ABI::analysis
