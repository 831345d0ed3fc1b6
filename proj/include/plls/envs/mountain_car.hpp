#pragma once

#include "plls/envs/env.hpp"

namespace plls::inline PLLS_ABI::envs {

namespace mc {
inline constexpr double kMinPosition = -1.2;
inline constexpr double kMaxPosition = 0.5;
inline constexpr double kMaxSpeed = 0.07;
inline constexpr double kGoalPosition = 0.45;
inline constexpr double kPower = 0.0015;
inline constexpr double kGravity = 0.0025;
inline constexpr std::size_t kStepLimit = 999;
}  // namespace mc

struct McState {
  double position = 0;
  double velocity = 0;
};

struct McStep {
  McState state;
  double reward = 0;
  bool goal = false;
};

/// x ~ U[-0.6, -0.4], velocity 0.
McState mc_reset(std::uint64_t seed);
/// One transition of the continuous mountain car; `action` is clamped to
/// [-1, 1] and must be finite.
McStep mc_step(const McState& s, double action);

class MountainCar final : public Env {
 public:
  std::string name() const override { return "mountaincar"; }
  Shape observation_shape() const override { return {2}; }
  Box action_box() const override { return {{-1}, {1}}; }
  Box observation_box() const override {
    return {{Real(mc::kMinPosition), Real(-mc::kMaxSpeed)}, {Real(mc::kMaxPosition), Real(mc::kMaxSpeed)}};
  }
  std::size_t step_limit() const override { return mc::kStepLimit; }
  std::vector<Real> reset(std::uint64_t seed) override;
  StepResult step(std::span<const Real> action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<MountainCar>(*this); }
  Descriptor descriptor() const override;
  std::vector<std::uint8_t> snapshot() const override;
  std::vector<Real> restore(const std::vector<std::uint8_t>& bytes) override;

  const McState& state() const { return state_; }
  /// Places the car at an arbitrary state and restarts the step counter.
  std::vector<Real> set_state(const McState& s);
  std::size_t steps() const { return steps_; }

 private:
  std::vector<Real> observe() const;

  McState state_;
  std::size_t steps_ = 0;
};

}  // namespace plls::inline PLLS_ABI::envs
