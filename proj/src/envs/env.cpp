#include "plls/envs/env.hpp"

#include <algorithm>
#include <cmath>

#include "plls/envs/mountain_car.hpp"
#include "plls/envs/pixel_racer.hpp"

namespace plls::inline PLLS_ABI::envs {

void Box::clamp(std::span<Real> action) const {
  if (action.size() != dim()) {
    throw DimensionError("action has " + std::to_string(action.size()) + " components, box has " +
                         std::to_string(dim()));
  }
  for (std::size_t i = 0; i < action.size(); ++i) {
    if (!std::isfinite(action[i])) throw ContractError("non-finite action component " + std::to_string(i));
    action[i] = std::clamp(action[i], low[i], high[i]);
  }
}

bool Box::contains(std::span<const Real> action) const {
  if (action.size() != dim()) return false;
  for (std::size_t i = 0; i < action.size(); ++i) {
    if (!(action[i] >= low[i] && action[i] <= high[i])) return false;
  }
  return true;
}

Descriptor EnvSpec::descriptor() const {
  Descriptor d;
  d.set("env", name);
  if (name == "pixelracer") d.set("resolution", resolution);
  return d;
}

EnvSpec EnvSpec::from_descriptor(const Descriptor& d) {
  EnvSpec spec;
  spec.name = d.get("env");
  if (d.has("resolution")) spec.resolution = d.get_size("resolution");
  return spec;
}

const std::vector<std::string>& env_names() {
  static const std::vector<std::string> names{"mountaincar", "pixelracer"};
  return names;
}

std::unique_ptr<Env> make_env(const EnvSpec& spec) {
  if (spec.name == "mountaincar") return std::make_unique<MountainCar>();
  if (spec.name == "pixelracer") {
    RacerParams params;
    params.resolution = spec.resolution;
    return std::make_unique<PixelRacer>(params);
  }
  std::string valid;
  for (const auto& n : env_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw std::invalid_argument("unknown environment '" + spec.name + "' (valid: " + valid + ")");
}

}  // namespace plls::inline PLLS_ABI::envs
