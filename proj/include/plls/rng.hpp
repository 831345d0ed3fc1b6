#pragma once

#include <cstdint>
#include <random>

#include "plls/config.hpp"

namespace plls::inline PLLS_ABI {

/// splitmix64 mix of (seed, stream) into an independent seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Seeded generator used everywhere randomness appears. Draws are produced by
// the standard library distributions, so streams are reproducible for a given
// toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  Real uniform(Real lo = 0, Real hi = 1) { return std::uniform_real_distribution<Real>(lo, hi)(engine_); }
  Real normal() { return normal_(engine_); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }
  std::uint64_t next() { return engine_(); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<Real> normal_{0, 1};
};

}  // namespace plls::inline PLLS_ABI
