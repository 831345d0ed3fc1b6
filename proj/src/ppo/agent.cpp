#include "plls/ppo/agent.hpp"

#include <cmath>

namespace plls::inline PLLS_ABI::ppo {

PolicyActor::PolicyActor(const ActorCritic& model, const Representation& representation, envs::Box box,
                         bool stochastic, std::uint64_t seed)
    : model_(model), representation_(representation), box_(std::move(box)), stochastic_(stochastic), rng_(seed) {
  if (box_.dim() != representation_.action_dim()) {
    throw DimensionError("policy actor: action box has " + std::to_string(box_.dim()) +
                         " dims, representation decodes " + std::to_string(representation_.action_dim()));
  }
}

rollout::ActBatch PolicyActor::act(std::span<const Real> observations, std::size_t n) {
  const std::size_t zd = representation_.state_dim(), ed = representation_.latent_action_dim();
  rollout::ActBatch out;
  out.inputs = representation_.encode_states(observations, n);
  autograd::NoGradGuard no_grad;
  const auto forward = model_.forward(Tensor(Shape{n, zd}, out.inputs));
  const auto mean = forward.policy.mean.data();
  const auto log_std = forward.policy.log_std.data();
  out.latent_actions.resize(n * ed);
  for (std::size_t i = 0; i < n * ed; ++i) {
    out.latent_actions[i] = stochastic_ ? mean[i] + std::exp(log_std[i]) * rng_.normal() : mean[i];
  }
  out.log_probs.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.log_probs[i] = nn::gaussian_log_prob(mean.subspan(i * ed, ed), log_std.subspan(i * ed, ed),
                                             std::span<const Real>(out.latent_actions).subspan(i * ed, ed));
  }
  out.actions = representation_.decode_actions(out.latent_actions, n);
  const std::size_t ad = box_.dim();
  if (out.actions.size() != n * ad) throw DimensionError("policy actor: decoder returned a wrong-sized batch");
  for (std::size_t i = 0; i < n; ++i) box_.clamp(std::span<Real>(out.actions).subspan(i * ad, ad));
  const auto values = forward.value.data();
  out.values.assign(values.begin(), values.end());
  return out;
}

std::vector<Real> PolicyActor::value(std::span<const Real> observations, std::size_t n) {
  const auto inputs = representation_.encode_states(observations, n);
  autograd::NoGradGuard no_grad;
  const auto forward = model_.forward(Tensor(Shape{n, representation_.state_dim()}, inputs));
  const auto values = forward.value.data();
  return {values.begin(), values.end()};
}

void check_compatible(const ActorCritic& model, const Representation& representation, const envs::Env& env) {
  if (model.input_dim() != representation.state_dim()) {
    throw DimensionError("policy input dim " + std::to_string(model.input_dim()) +
                         " differs from state representation dim " + std::to_string(representation.state_dim()));
  }
  if (model.action_dim() != representation.latent_action_dim()) {
    throw DimensionError("policy output dim " + std::to_string(model.action_dim()) +
                         " differs from action representation dim " +
                         std::to_string(representation.latent_action_dim()));
  }
  if (representation.observation_size() != env.observation_size()) {
    throw DimensionError("state representation expects " + std::to_string(representation.observation_size()) +
                         " observation features, " + env.name() + " emits " +
                         std::to_string(env.observation_size()));
  }
  if (representation.action_dim() != env.action_box().dim()) {
    throw DimensionError("action representation decodes " + std::to_string(representation.action_dim()) +
                         " dims, " + env.name() + " takes " + std::to_string(env.action_box().dim()));
  }
}

}  // namespace plls::inline PLLS_ABI::ppo
