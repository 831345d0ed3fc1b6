#include "plls/rollout/collect.hpp"

#include <cmath>
#include <numeric>

#include "plls/io.hpp"
#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::rollout {

namespace {

constexpr std::uint64_t kEvalStream = 0xe7a1'0000'0000ULL;

void require_finite(std::span<const Real> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ContractError(std::string("actor returned non-finite ") + what + " at index " + std::to_string(i));
    }
  }
}

void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string("actor returned ") + std::to_string(got) + " " + what + ", expected " +
                         std::to_string(want));
  }
}

}  // namespace

VecEnv::VecEnv(const envs::EnvSpec& spec, std::size_t n, std::uint64_t seed) : seed_(seed) {
  if (n == 0) throw std::invalid_argument("VecEnv needs at least one environment");
  auto prototype = envs::make_env(spec);
  box_ = prototype->action_box();
  obs_size_ = prototype->observation_size();
  observations_.resize(n * obs_size_);
  episode_counts_.assign(n, 0);
  running_returns_.assign(n, 0.0);
  running_lengths_.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) envs_.push_back(prototype->clone());
  for (std::size_t i = 0; i < n; ++i) {
    const auto obs = envs_[i]->reset(episode_seed(i));
    std::copy(obs.begin(), obs.end(), observations_.begin() + static_cast<std::ptrdiff_t>(i * obs_size_));
  }
}

std::uint64_t VecEnv::episode_seed(std::size_t env_index) const {
  return derive_seed(derive_seed(seed_, env_index), episode_counts_[env_index]);
}

VecEnv::Step VecEnv::step(std::span<const Real> actions) {
  const std::size_t n = size(), a_dim = box_.dim();
  require_size(actions.size(), n * a_dim, "actions");
  // Exceptions must not escape the parallel region below.
  require_finite(actions, "action");
  Step out;
  out.rewards.resize(n);
  out.dones.resize(n);
  std::vector<std::uint8_t> terminated(n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    envs::StepResult r = envs_[i]->step(actions.subspan(i * a_dim, a_dim));
    out.rewards[i] = r.reward;
    out.dones[i] = r.done();
    terminated[i] = r.terminated;
    running_returns_[i] += r.reward;
    ++running_lengths_[i];
    if (r.done()) {
      ++episode_counts_[i];
      r.observation = envs_[i]->reset(episode_seed(i));
    }
    std::copy(r.observation.begin(), r.observation.end(),
              observations_.begin() + static_cast<std::ptrdiff_t>(i * obs_size_));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.dones[i]) continue;
    finished_.push_back({running_returns_[i], running_lengths_[i], terminated[i] != 0});
    running_returns_[i] = 0;
    running_lengths_[i] = 0;
  }
  return out;
}

std::vector<VecEnv::Finished> VecEnv::take_finished() { return std::exchange(finished_, {}); }

std::vector<std::uint8_t> VecEnv::snapshot() const {
  io::Writer w;
  w.u64(seed_);
  w.u64(size());
  for (std::size_t i = 0; i < size(); ++i) {
    w.u64(episode_counts_[i]);
    w.f64(running_returns_[i]);
    w.u64(running_lengths_[i]);
    const auto state = envs_[i]->snapshot();
    w.u64(state.size());
    w.bytes(state.data(), state.size());
  }
  return w.body();
}

void VecEnv::restore(const std::vector<std::uint8_t>& bytes) {
  auto r = io::Reader::raw(bytes, "environment snapshot");
  if (r.u64() != seed_ || r.u64() != size()) {
    throw std::invalid_argument("environment snapshot does not match this vector of environments");
  }
  finished_.clear();
  for (std::size_t i = 0; i < size(); ++i) {
    episode_counts_[i] = r.u64();
    running_returns_[i] = r.f64();
    running_lengths_[i] = r.u64();
    std::vector<std::uint8_t> state(r.u64());
    r.bytes(state.data(), state.size());
    const auto obs = envs_[i]->restore(state);
    std::copy(obs.begin(), obs.end(), observations_.begin() + static_cast<std::ptrdiff_t>(i * obs_size_));
  }
}

RolloutBatch collect_policy(VecEnv& envs, Actor& actor, std::size_t horizon) {
  if (horizon == 0) throw std::invalid_argument("collect_policy: horizon must be positive");
  const std::size_t n = envs.size();
  RolloutBatch b;
  b.n_envs = n;
  b.horizon = horizon;
  b.input_dim = actor.input_dim();
  b.latent_dim = actor.latent_action_dim();
  b.action_dim = envs.action_box().dim();
  const std::size_t rows = n * horizon;
  b.inputs.resize(rows * b.input_dim);
  b.latent_actions.resize(rows * b.latent_dim);
  b.actions.resize(rows * b.action_dim);
  b.rewards.resize(rows);
  b.dones.resize(rows);
  b.log_probs.resize(rows);
  b.values.resize(rows);

  for (std::size_t t = 0; t < horizon; ++t) {
    ActBatch out = actor.act(envs.observations(), n);
    require_size(out.inputs.size(), n * b.input_dim, "inputs");
    require_size(out.latent_actions.size(), n * b.latent_dim, "latent actions");
    require_size(out.actions.size(), n * b.action_dim, "actions");
    require_size(out.log_probs.size(), n, "log-probs");
    require_size(out.values.size(), n, "values");
    require_finite(out.latent_actions, "latent action");
    require_finite(out.actions, "action");
    require_finite(out.log_probs, "log-prob");
    require_finite(out.values, "value");

    const VecEnv::Step step = envs.step(out.actions);
    for (std::size_t e = 0; e < n; ++e) {
      const std::size_t row = e * horizon + t;
      std::copy_n(out.inputs.begin() + e * b.input_dim, b.input_dim, b.inputs.begin() + row * b.input_dim);
      std::copy_n(out.latent_actions.begin() + e * b.latent_dim, b.latent_dim,
                  b.latent_actions.begin() + row * b.latent_dim);
      std::copy_n(out.actions.begin() + e * b.action_dim, b.action_dim, b.actions.begin() + row * b.action_dim);
      b.rewards[row] = step.rewards[e];
      b.dones[row] = step.dones[e];
      b.log_probs[row] = out.log_probs[e];
      b.values[row] = out.values[e];
    }
  }
  b.bootstrap = actor.value(envs.observations(), n);
  require_size(b.bootstrap.size(), n, "bootstrap values");
  require_finite(b.bootstrap, "bootstrap value");
  b.finished = envs.take_finished();
  return b;
}

std::uint64_t evaluation_seed(std::uint64_t seed, std::size_t episode) {
  return derive_seed(seed ^ kEvalStream, episode);
}

EvalResult evaluate_actor(const envs::EnvSpec& spec, Actor& actor, std::size_t n_episodes, std::uint64_t seed) {
  if (n_episodes == 0) throw std::invalid_argument("evaluate: need at least one episode");
  auto prototype = envs::make_env(spec);
  const std::size_t obs_size = prototype->observation_size();
  const std::size_t a_dim = prototype->action_box().dim();
  std::vector<std::unique_ptr<envs::Env>> envs;
  std::vector<Real> observations(n_episodes * obs_size);
  for (std::size_t i = 0; i < n_episodes; ++i) {
    envs.push_back(prototype->clone());
    const auto obs = envs[i]->reset(evaluation_seed(seed, i));
    std::copy(obs.begin(), obs.end(), observations.begin() + static_cast<std::ptrdiff_t>(i * obs_size));
  }

  EvalResult result;
  result.returns.assign(n_episodes, 0.0);
  result.lengths.assign(n_episodes, 0);
  result.reached_goal.assign(n_episodes, 0);
  std::vector<std::size_t> live(n_episodes);
  std::iota(live.begin(), live.end(), std::size_t{0});
  std::vector<Real> batch;
  while (!live.empty()) {
    batch.resize(live.size() * obs_size);
    for (std::size_t j = 0; j < live.size(); ++j) {
      std::copy_n(observations.begin() + static_cast<std::ptrdiff_t>(live[j] * obs_size), obs_size,
                  batch.begin() + static_cast<std::ptrdiff_t>(j * obs_size));
    }
    const ActBatch out = actor.act(batch, live.size());
    require_size(out.actions.size(), live.size() * a_dim, "actions");
    require_finite(out.actions, "action");
    std::vector<std::uint8_t> done(live.size());
#pragma omp parallel for schedule(static)
    for (std::size_t j = 0; j < live.size(); ++j) {
      const std::size_t i = live[j];
      envs::StepResult r = envs[i]->step(std::span<const Real>(out.actions).subspan(j * a_dim, a_dim));
      result.returns[i] += r.reward;
      ++result.lengths[i];
      result.reached_goal[i] = r.terminated;
      done[j] = r.done();
      std::copy(r.observation.begin(), r.observation.end(),
                observations.begin() + static_cast<std::ptrdiff_t>(i * obs_size));
    }
    std::vector<std::size_t> still;
    for (std::size_t j = 0; j < live.size(); ++j) {
      if (!done[j]) still.push_back(live[j]);
    }
    live = std::move(still);
  }
  result.mean = std::accumulate(result.returns.begin(), result.returns.end(), 0.0) / static_cast<double>(n_episodes);
  double var = 0;
  for (double r : result.returns) var += (r - result.mean) * (r - result.mean);
  result.std = std::sqrt(var / static_cast<double>(n_episodes));
  return result;
}

}  // namespace plls::inline PLLS_ABI::rollout
