#include "plls/ppo/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace plls::inline PLLS_ABI::ppo {

double returns(std::span<const Real> rewards, double gamma) {
  double total = 0, discount = 1;
  for (Real r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

GaeResult gae(std::span<const Real> rewards, std::span<const Real> values, std::span<const std::uint8_t> dones,
              Real bootstrap, Real gamma, Real lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw DimensionError("gae: rewards, values and dones must have equal length (" + std::to_string(n) + ", " +
                         std::to_string(values.size()) + ", " + std::to_string(dones.size()) + ")");
  }
  GaeResult out;
  out.advantages.resize(n);
  out.targets.resize(n);
  Real next_value = bootstrap, next_advantage = 0;
  for (std::size_t i = n; i-- > 0;) {
    const Real live = dones[i] ? Real{0} : Real{1};
    const Real delta = rewards[i] + gamma * next_value * live - values[i];
    next_advantage = delta + gamma * lambda * live * next_advantage;
    out.advantages[i] = next_advantage;
    out.targets[i] = next_advantage + values[i];
    next_value = values[i];
  }
  return out;
}

void normalize_advantages(std::span<Real> advantages) {
  if (advantages.empty()) return;
  double mean = 0;
  for (Real a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  double var = 0;
  for (Real a : advantages) var += (a - mean) * (a - mean);
  const double std = std::max(std::sqrt(var / static_cast<double>(advantages.size())), kAdvantageStdFloor);
  for (Real& a : advantages) a = static_cast<Real>((a - mean) / std);
}

Real clipped_surrogate(Real ratio, Real advantage, Real clip) {
  const Real clipped = std::clamp(ratio, Real{1} - clip, Real{1} + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

PpoLoss ppo_loss(const ActorCritic& model, const Minibatch& batch, const PpoConfig& config) {
  const std::size_t n = batch.size, in = model.input_dim(), ad = model.action_dim();
  if (n == 0) throw ContractError("ppo_loss: empty minibatch");
  if (batch.inputs.size() != n * in || batch.latent_actions.size() != n * ad || batch.old_log_probs.size() != n ||
      batch.advantages.size() != n || batch.targets.size() != n) {
    throw DimensionError("ppo_loss: minibatch fields do not match " + std::to_string(n) + " rows");
  }
  const Tensor inputs(Shape{n, in}, batch.inputs);
  const Tensor actions(Shape{n, ad}, batch.latent_actions);
  const Tensor old_log_probs(Shape{n}, batch.old_log_probs);
  const Tensor advantages(Shape{n}, batch.advantages);
  const Tensor targets(Shape{n}, batch.targets);

  const auto out = model.forward(inputs);
  const Tensor log_probs = nn::gaussian_log_prob(out.policy, actions);
  const Tensor ratio = exp(sub(log_probs, old_log_probs));

  PpoLoss loss;
  std::size_t clipped = 0;
  double kl = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real r = ratio[i];
    if (!std::isfinite(r)) {
      const std::size_t row = batch.rows.empty() ? i : batch.rows[i];
      throw ContractError("ppo_loss: non-finite importance ratio at transition " + std::to_string(row) +
                          " (log pi_new " + std::to_string(log_probs[i]) + ", log pi_old " +
                          std::to_string(batch.old_log_probs[i]) + ")");
    }
    if (std::abs(r - 1) > config.clip) ++clipped;
    kl += static_cast<double>(batch.old_log_probs[i]) - log_probs[i];
  }
  loss.approx_kl = kl / static_cast<double>(n);
  loss.clip_fraction = static_cast<double>(clipped) / static_cast<double>(n);

  const Tensor surrogate = minimum(mul(ratio, advantages),
                                   mul(clamp(ratio, Real{1} - config.clip, Real{1} + config.clip), advantages));
  loss.policy = scale(mean(surrogate), Real{-1});
  loss.value = mean(square(sub(out.value, targets)));
  loss.entropy = mean(nn::gaussian_entropy(out.policy));
  loss.total = add(add(loss.policy, scale(loss.value, config.vf_coeff)), scale(loss.entropy, -config.entropy_coeff));
  return loss;
}

Minibatch Batch::gather(std::span<const std::size_t> rows) const {
  Minibatch mb;
  mb.size = rows.size();
  mb.rows.assign(rows.begin(), rows.end());
  mb.inputs.reserve(rows.size() * input_dim);
  mb.latent_actions.reserve(rows.size() * action_dim);
  for (std::size_t r : rows) {
    const auto in0 = inputs.begin() + static_cast<std::ptrdiff_t>(r * input_dim);
    mb.inputs.insert(mb.inputs.end(), in0, in0 + static_cast<std::ptrdiff_t>(input_dim));
    const auto a0 = latent_actions.begin() + static_cast<std::ptrdiff_t>(r * action_dim);
    mb.latent_actions.insert(mb.latent_actions.end(), a0, a0 + static_cast<std::ptrdiff_t>(action_dim));
    mb.old_log_probs.push_back(old_log_probs[r]);
    mb.advantages.push_back(advantages[r]);
    mb.targets.push_back(targets[r]);
  }
  return mb;
}

UpdateStats ppo_update(ActorCritic& model, nn::Adam& optimizer, const Batch& batch, const PpoConfig& config,
                       Rng& rng) {
  if (batch.size != config.batch_size()) {
    throw DimensionError("ppo_update: batch has " + std::to_string(batch.size) + " rows, config expects " +
                         std::to_string(config.batch_size()));
  }
  std::vector<std::size_t> order(batch.size);
  UpdateStats stats;
  for (std::size_t epoch = 0; epoch < config.n_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < batch.size; start += config.minibatch_size) {
      const auto rows = std::span<const std::size_t>(order).subspan(start, config.minibatch_size);
      const PpoLoss loss = ppo_loss(model, batch.gather(rows), config);
      optimizer.zero_grad();
      loss.total.backward();
      if (config.max_grad_norm > 0) nn::clip_grad_norm(optimizer.params(), config.max_grad_norm);
      optimizer.step();
      stats.policy_loss += loss.policy.item();
      stats.value_loss += loss.value.item();
      stats.entropy += loss.entropy.item();
      stats.approx_kl += loss.approx_kl;
      stats.clip_fraction += loss.clip_fraction;
      ++stats.minibatches;
    }
  }
  const double k = static_cast<double>(stats.minibatches);
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.approx_kl /= k;
  stats.clip_fraction /= k;
  return stats;
}

}  // namespace plls::inline PLLS_ABI::ppo
