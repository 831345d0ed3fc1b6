#include "plls/ppo/config.hpp"

#include <cmath>
#include <stdexcept>

namespace plls::inline PLLS_ABI::ppo {

void PpoConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("ppo config: " + msg); };
  if (horizon == 0) fail("horizon must be positive");
  if (n_envs == 0) fail("n_envs must be positive");
  if (n_epochs == 0) fail("n_epochs must be positive");
  if (minibatch_size == 0) fail("minibatch_size must be positive");
  if (batch_size() % minibatch_size != 0) {
    fail("minibatch_size " + std::to_string(minibatch_size) + " does not divide batch size " +
         std::to_string(batch_size()));
  }
  if (!(learning_rate >= 0)) fail("learning_rate must be non-negative");
  if (!(gamma > 0 && gamma <= 1)) fail("gamma must lie in (0, 1]");
  if (!(lambda > 0 && lambda <= 1)) fail("lambda must lie in (0, 1]");
  if (!(clip > 0)) fail("clip must be positive");
  if (!(vf_coeff >= 0)) fail("vf_coeff must be non-negative");
  if (!(entropy_coeff >= 0)) fail("entropy_coeff must be non-negative");
  if (!(reward_scale > 0)) fail("reward_scale must be positive");
  if (!(max_grad_norm >= 0)) fail("max_grad_norm must be non-negative");
  if (total_iterations == 0) fail("total_iterations must be positive");
  if (eval_interval == 0) fail("eval_interval must be positive");
  if (eval_episodes == 0) fail("eval_episodes must be positive");
  if (save_interval == 0) fail("save_interval must be positive");
}

Descriptor PpoConfig::descriptor() const {
  Descriptor d;
  d.set("horizon", horizon);
  d.set("learning_rate", static_cast<double>(learning_rate));
  d.set("n_epochs", n_epochs);
  d.set("minibatch_size", minibatch_size);
  d.set("n_envs", n_envs);
  d.set("gamma", static_cast<double>(gamma));
  d.set("lambda", static_cast<double>(lambda));
  d.set("clip", static_cast<double>(clip));
  d.set("vf_coeff", static_cast<double>(vf_coeff));
  d.set("entropy_coeff", static_cast<double>(entropy_coeff));
  d.set("reward_scale", static_cast<double>(reward_scale));
  d.set("max_grad_norm", static_cast<double>(max_grad_norm));
  d.set("total_iterations", total_iterations);
  d.set("seed", static_cast<std::size_t>(seed));
  d.set("eval_interval", eval_interval);
  d.set("eval_episodes", eval_episodes);
  d.set("save_interval", save_interval);
  d.set("target_return", target_return);
  return d;
}

PpoConfig PpoConfig::from_descriptor(const Descriptor& d) {
  PpoConfig c;
  c.horizon = d.get_size("horizon");
  c.learning_rate = static_cast<Real>(d.get_double("learning_rate"));
  c.n_epochs = d.get_size("n_epochs");
  c.minibatch_size = d.get_size("minibatch_size");
  c.n_envs = d.get_size("n_envs");
  c.gamma = static_cast<Real>(d.get_double("gamma"));
  c.lambda = static_cast<Real>(d.get_double("lambda"));
  c.clip = static_cast<Real>(d.get_double("clip"));
  c.vf_coeff = static_cast<Real>(d.get_double("vf_coeff"));
  c.entropy_coeff = static_cast<Real>(d.get_double("entropy_coeff"));
  c.reward_scale = static_cast<Real>(d.get_double("reward_scale"));
  c.max_grad_norm = static_cast<Real>(d.get_double("max_grad_norm"));
  c.total_iterations = d.get_size("total_iterations");
  c.seed = d.get_size("seed");
  c.eval_interval = d.get_size("eval_interval");
  c.eval_episodes = d.get_size("eval_episodes");
  c.save_interval = d.get_size("save_interval");
  c.target_return = d.get_double("target_return");
  c.validate();
  return c;
}

PpoConfig PpoConfig::mountaincar_plls() {
  PpoConfig c;
  // Keeps the +100 goal reward from swamping the shared trunk through the
  // value loss.
  c.reward_scale = Real(0.01);
  return c;
}

PpoConfig PpoConfig::mountaincar_ppo() {
  PpoConfig c = mountaincar_plls();
  c.learning_rate = Real(3e-4);
  return c;
}

PpoConfig PpoConfig::pixelracer() {
  PpoConfig c;
  c.horizon = 1000;
  c.learning_rate = Real(1e-4);
  c.minibatch_size = 1000;
  c.n_envs = 16;
  c.total_iterations = 500;
  return c;
}

}  // namespace plls::inline PLLS_ABI::ppo
