#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "plls/descriptor.hpp"
#include "plls/tensor/tensor.hpp"

namespace plls::inline PLLS_ABI::envs {

// Axis-aligned bounds for actions or low-dimensional observations.
struct Box {
  std::vector<Real> low;
  std::vector<Real> high;

  std::size_t dim() const { return low.size(); }
  /// Clamps in place; throws ContractError on non-finite components.
  void clamp(std::span<Real> action) const;
  bool contains(std::span<const Real> action) const;
};

struct StepResult {
  std::vector<Real> observation;
  Real reward = 0;
  bool terminated = false;  // goal reached / task complete
  bool truncated = false;   // step limit hit

  bool done() const { return terminated || truncated; }
};

// Single-agent episodic environment with a flat float observation laid out as
// observation_shape() (CHW for images) and a continuous box action.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string name() const = 0;
  virtual Shape observation_shape() const = 0;
  virtual Box action_box() const = 0;
  /// Bounds of vector observations; empty for images.
  virtual Box observation_box() const { return {}; }
  virtual std::size_t step_limit() const = 0;
  /// Starts an episode; the result is a deterministic function of `seed`.
  virtual std::vector<Real> reset(std::uint64_t seed) = 0;
  /// Clamps `action` into the box before use.
  virtual StepResult step(std::span<const Real> action) = 0;
  virtual std::unique_ptr<Env> clone() const = 0;
  virtual Descriptor descriptor() const = 0;

  /// Serialized mid-episode state; restore() reproduces the same future
  /// trajectory for the same actions.
  virtual std::vector<std::uint8_t> snapshot() const = 0;
  virtual std::vector<Real> restore(const std::vector<std::uint8_t>& bytes) = 0;

  std::size_t observation_size() const { return shape_numel(observation_shape()); }
};

struct EnvSpec {
  std::string name = "mountaincar";
  std::size_t resolution = 64;  // image side for pixel environments

  Descriptor descriptor() const;
  static EnvSpec from_descriptor(const Descriptor& d);
};

const std::vector<std::string>& env_names();
/// Throws std::invalid_argument listing the valid names.
std::unique_ptr<Env> make_env(const EnvSpec& spec);

}  // namespace plls::inline PLLS_ABI::envs
