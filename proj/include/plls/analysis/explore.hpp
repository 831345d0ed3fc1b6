#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "plls/envs/mountain_car.hpp"
#include "plls/vae/vae.hpp"

// Latent-space exploration of a trained one-dimensional MountainCar action
// model. Latent coordinates are encoder means; reconstructions decode them.
namespace plls::inline PLLS_ABI::analysis {

inline constexpr envs::McState kMultiStepStart{-1.2, 0.0};
inline constexpr envs::McState kOneStepStart{-0.5233, 0.0};

struct LatentRecord {
  double action = 0;
  std::vector<double> latent;
  double recon = 0;
  int sign_class = 0;  // 1 for a > 0, 0 otherwise
  std::array<double, 3> color{};
};

/// Affine map of each of the first three latent dimensions onto [0, 1] over the
/// batch (min to 0, max to 1); a constant dimension maps to 0.
void assign_colors(std::vector<LatentRecord>& records);

struct TracePoint {
  std::size_t t = 0;
  double x = 0;
  double xdot = 0;
};

struct MultiStepResult {
  std::vector<LatentRecord> records;
  std::vector<TracePoint> raw;    // n + 1 states, the start included
  std::vector<TracePoint> recon;  // same start, driven by reconstructions
  double mean_position_deviation = 0;
};

/// n uniform actions executed in sequence from (-1.2, 0), once as drawn and
/// once reconstructed. Goal arrival does not stop the traces.
MultiStepResult explore_multi_step(const vae::VaeModel& va, std::size_t n, std::uint64_t seed);

struct Transition {
  double action = 0;
  double recon = 0;
  envs::McState raw_next;
  envs::McState recon_next;
};

struct OneStepResult {
  std::vector<LatentRecord> records;
  std::vector<Transition> transitions;
};

/// n/2 actions in [-1, 0) then n - n/2 in (0, 1], each executed once from
/// (-0.5233, 0) raw and reconstructed.
OneStepResult explore_one_step(const vae::VaeModel& va, std::size_t n, std::uint64_t seed);

struct NeighborDraw {
  std::vector<double> latent;
  double decoded = 0;
  envs::McState next;  // one step from (-0.5233, 0)
};

struct NeighborFan {
  double base = 0;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<NeighborDraw> draws;
};

/// 5 bases in [-1, 0) followed by 5 in (0, 1].
std::vector<double> neighbor_bases(std::uint64_t seed);

/// k reparameterized latents around each base's encoding, decoded.
std::vector<NeighborFan> neighbor_generalization(const vae::VaeModel& va, const std::vector<double>& bases,
                                                 std::size_t k, std::uint64_t seed);

/// Fraction of draws whose decoded action has the base's sign.
double sign_agreement(const std::vector<NeighborFan>& fans);

struct LatentStructure {
  double separability = 0;  // held-out accuracy of a linear sign classifier
  double triple_order = 0;  // fraction of sorted triples with d(1,2) < d(1,3)
  double round_trip = 0;    // fraction with |dec(enc(a)) - a| <= 0.1
};

/// Statistics over n uniform actions in [-1, 1].
LatentStructure latent_structure(const vae::VaeModel& va, std::size_t n, std::uint64_t seed);

/// Held-out accuracy of logistic regression trained on the first half of the
/// points and scored on the second half.
double linear_separability(const std::vector<std::vector<double>>& points, const std::vector<int>& labels);

/// Sign separability of latent records: every other record trains the
/// classifier, the rest score it.
double record_separability(const std::vector<LatentRecord>& records);

/// action,l,m,n[,z3...],recon,class,R,G,B
void write_latent_csv(std::ostream& out, const std::vector<LatentRecord>& records);
/// t,x,xdot,variant with variant raw or recon.
void write_trace_csv(std::ostream& out, const MultiStepResult& result);
/// action,recon,x,xdot,x_recon,xdot_recon,class
void write_transition_csv(std::ostream& out, const std::vector<Transition>& transitions);
/// base,draw,l,m,n[,z3...],decoded,x,xdot
void write_neighbor_csv(std::ostream& out, const std::vector<NeighborFan>& fans);

}  // namespace plls::inline PLLS_ABI::analysis
