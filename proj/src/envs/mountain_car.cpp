#include "plls/envs/mountain_car.hpp"

#include <algorithm>
#include <cmath>

#include "plls/io.hpp"
#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::envs {

McState mc_reset(std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  return {std::uniform_real_distribution<double>(-0.6, -0.4)(engine), 0.0};
}

McStep mc_step(const McState& s, double action) {
  if (!std::isfinite(action)) throw ContractError("mountain car: non-finite action");
  const double a = std::clamp(action, -1.0, 1.0);
  McStep out;
  double v = s.velocity + mc::kPower * a - mc::kGravity * std::cos(3 * s.position);
  v = std::clamp(v, -mc::kMaxSpeed, mc::kMaxSpeed);
  double x = std::clamp(s.position + v, mc::kMinPosition, mc::kMaxPosition);
  if (x == mc::kMinPosition && v < 0) v = 0;
  out.state = {x, v};
  out.goal = x >= mc::kGoalPosition;
  out.reward = -0.1 * a * a + (out.goal ? 100.0 : 0.0);
  return out;
}

std::vector<Real> MountainCar::observe() const {
  return {static_cast<Real>(state_.position), static_cast<Real>(state_.velocity)};
}

std::vector<Real> MountainCar::reset(std::uint64_t seed) { return set_state(mc_reset(seed)); }

std::vector<Real> MountainCar::set_state(const McState& s) {
  state_ = s;
  steps_ = 0;
  return observe();
}

StepResult MountainCar::step(std::span<const Real> action) {
  if (action.size() != 1) throw DimensionError("mountain car takes a 1-d action");
  const McStep next = mc_step(state_, action[0]);
  state_ = next.state;
  ++steps_;
  StepResult r;
  r.observation = observe();
  r.reward = static_cast<Real>(next.reward);
  r.terminated = next.goal;
  r.truncated = !next.goal && steps_ >= mc::kStepLimit;
  return r;
}

Descriptor MountainCar::descriptor() const {
  Descriptor d;
  d.set("env", name());
  return d;
}

std::vector<std::uint8_t> MountainCar::snapshot() const {
  io::Writer w;
  w.f64(state_.position);
  w.f64(state_.velocity);
  w.u64(steps_);
  return w.body();
}

std::vector<Real> MountainCar::restore(const std::vector<std::uint8_t>& bytes) {
  auto r = io::Reader::raw(bytes, "mountain car snapshot");
  state_.position = r.f64();
  state_.velocity = r.f64();
  steps_ = r.u64();
  return observe();
}

}  // namespace plls::inline PLLS_ABI::envs
