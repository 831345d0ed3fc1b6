#include "plls/analysis/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "plls/descriptor.hpp"

namespace plls::inline PLLS_ABI::analysis {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string optional_field(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : ""; }

}  // namespace

Curve read_eval_curve(const std::filesystem::path& run_dir) {
  const auto path = run_dir / "eval.csv";
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  const auto header = split(line, ',');
  if (header.size() < 2 || header[0] != "iteration" || header[1] != "mean_return") {
    throw std::runtime_error(path.string() + ": expected iteration,mean_return columns");
  }
  Curve c;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    try {
      if (fields.size() < 2) throw std::invalid_argument("short row");
      c.iterations.push_back(std::stoull(fields[0]));
      c.returns.push_back(std::stod(fields[1]));
    } catch (const std::exception&) {
      throw std::runtime_error(path.string() + ": malformed row " + std::to_string(row));
    }
  }
  return c;
}

std::optional<Plateau> find_plateau(const Curve& curve, std::size_t window, double tolerance) {
  if (window == 0) throw std::invalid_argument("find_plateau: window must be positive");
  const auto& r = curve.returns;
  if (r.size() <= window) return std::nullopt;
  double sum = 0;
  for (std::size_t i = 0; i < window; ++i) sum += r[i];
  double previous = sum / double(window);
  for (std::size_t i = window; i < r.size(); ++i) {
    sum += r[i] - r[i - window];
    const double current = sum / double(window);
    if (previous != 0 && std::abs(current - previous) < tolerance * std::abs(previous)) {
      return Plateau{i, curve.iterations.at(i)};
    }
    previous = current;
  }
  return std::nullopt;
}

std::vector<EfficiencyRow> efficiency_report(const std::vector<ModelEntry>& models) {
  std::vector<EfficiencyRow> rows;
  for (const auto& m : models) {
    EfficiencyRow row{m.name, m.params.total, m.params.trainable, std::nullopt, std::nullopt};
    if (m.curve) {
      if (const auto p = find_plateau(*m.curve)) {
        row.batches_to_convergence = p->iteration;
        row.samples_to_convergence = p->iteration * m.batch_size;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

void write_efficiency_csv(std::ostream& out, const std::vector<EfficiencyRow>& rows) {
  out << "model,total_parameters,trainable_parameters,batches_to_convergence,samples_to_convergence\n";
  for (const auto& r : rows) {
    out << r.model << ',' << r.total_parameters << ',' << r.trainable_parameters << ','
        << optional_field(r.batches_to_convergence) << ',' << optional_field(r.samples_to_convergence) << '\n';
  }
}

AggregateCurve aggregate_curves(const std::vector<Curve>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate_curves: no runs");
  bool aligned = true;
  for (const auto& r : runs) {
    if (r.iterations.size() != r.returns.size()) throw std::invalid_argument("aggregate_curves: ragged curve");
    aligned = aligned && r.iterations == runs.front().iterations;
  }
  if (!aligned) {
    std::ostringstream msg;
    msg << "aggregate_curves: iteration grids differ; lengths";
    for (const auto& r : runs) msg << ' ' << r.iterations.size();
    throw std::invalid_argument(msg.str());
  }
  AggregateCurve out;
  out.trials = runs.size();
  out.iterations = runs.front().iterations;
  const double n = double(runs.size());
  for (std::size_t i = 0; i < out.iterations.size(); ++i) {
    double mean = 0;
    for (const auto& r : runs) mean += r.returns[i];
    mean /= n;
    double var = 0;
    for (const auto& r : runs) var += (r.returns[i] - mean) * (r.returns[i] - mean);
    out.mean.push_back(mean);
    out.std.push_back(std::sqrt(var / n));
  }
  return out;
}

AggregateCurve aggregate_runs(const std::vector<std::filesystem::path>& run_dirs) {
  std::vector<Curve> curves;
  for (const auto& dir : run_dirs) curves.push_back(read_eval_curve(dir));
  return aggregate_curves(curves);
}

void write_curves_csv(std::ostream& out, const AggregateCurve& curve) {
  out << "# std_return is the population std over " << curve.trials << " trials\n";
  out << "iteration,mean_return,std_return\n";
  for (std::size_t i = 0; i < curve.iterations.size(); ++i) {
    out << curve.iterations[i] << ',' << fmt(curve.mean[i]) << ',' << fmt(curve.std[i]) << '\n';
  }
}

}  // namespace plls::inline PLLS_ABI::analysis
