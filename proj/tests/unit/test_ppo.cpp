#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plls/ppo/trainer.hpp"

using namespace plls;
using namespace plls::ppo;

namespace {

// Independent oracle: A_t = sum_k (gamma lambda)^k delta_{t+k}, stopping after
// the first done, with delta computed from its definition.
std::vector<double> brute_force_gae(const std::vector<Real>& r, const std::vector<Real>& v,
                                    const std::vector<std::uint8_t>& d, double bootstrap, double gamma,
                                    double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? v[t + 1] : bootstrap;
    delta[t] = r[t] + gamma * next * (d[t] ? 0 : 1) - v[t];
  }
  std::vector<double> adv(n);
  for (std::size_t t = 0; t < n; ++t) {
    double sum = 0, weight = 1;
    for (std::size_t k = t; k < n; ++k) {
      sum += weight * delta[k];
      if (d[k]) break;
      weight *= gamma * lambda;
    }
    adv[t] = sum;
  }
  return adv;
}

ActorCriticConfig small_policy(std::uint64_t seed = 3) {
  ActorCriticConfig c;
  c.input_dim = 3;
  c.hidden = {8, 6};
  c.action_dim = 2;
  c.seed = seed;
  return c;
}

Batch synthetic_batch(const ActorCritic& model, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Batch b;
  b.size = n;
  b.input_dim = model.input_dim();
  b.action_dim = model.action_dim();
  for (std::size_t i = 0; i < n * b.input_dim; ++i) b.inputs.push_back(rng.uniform(-1, 1));
  for (std::size_t i = 0; i < n * b.action_dim; ++i) b.latent_actions.push_back(rng.normal());
  for (std::size_t i = 0; i < n; ++i) {
    b.advantages.push_back(rng.normal());
    b.targets.push_back(rng.uniform(-1, 1));
  }
  normalize_advantages(b.advantages);
  autograd::NoGradGuard no_grad;
  const auto out = model.forward(Tensor(Shape{n, b.input_dim}, b.inputs));
  const Tensor lp = nn::gaussian_log_prob(out.policy, Tensor(Shape{n, b.action_dim}, b.latent_actions));
  b.old_log_probs.assign(lp.data().begin(), lp.data().end());
  return b;
}

std::vector<std::vector<Real>> snapshot(const ActorCritic& m) {
  std::vector<std::vector<Real>> out;
  for (const auto& p : m.parameters()) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

PpoConfig tiny_config() {
  PpoConfig c;
  c.horizon = 16;
  c.n_envs = 2;
  c.minibatch_size = 8;
  c.n_epochs = 2;
  c.total_iterations = 4;
  c.eval_interval = 2;
  c.eval_episodes = 2;
  c.save_interval = 2;
  c.seed = 5;
  return c;
}

ActorCritic mountaincar_policy(std::uint64_t seed = 1) {
  ActorCriticConfig c;
  c.input_dim = 2;
  c.hidden = {16, 8};
  c.action_dim = 1;
  c.init_log_std = 1;
  c.input_offset = {Real(-0.3), 0};
  c.input_scale = {Real(1 / 0.9), Real(1 / 0.07)};
  c.seed = seed;
  return ActorCritic(c);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Returns, Examples) {
  const std::vector<Real> ones{1, 1, 1};
  EXPECT_DOUBLE_EQ(returns(ones, 1.0), 3.0);
  const std::vector<Real> late{0, 0, 100};
  EXPECT_NEAR(returns(late, 0.99), 100 * 0.99 * 0.99, 1e-9);
  EXPECT_NEAR(returns(late, 0.99), 98.01, 1e-9);
  EXPECT_EQ(returns({}, 0.9), 0.0);
}

TEST(Gae, SingleStep) {
  const std::vector<Real> r{1}, v{0};
  const std::vector<std::uint8_t> d{0};
  const auto g = gae(r, v, d, 0, Real(0.99), Real(0.95));
  EXPECT_FLOAT_EQ(g.advantages[0], 1);
  EXPECT_FLOAT_EQ(g.targets[0], 1);
}

TEST(Gae, LambdaZeroIsTdError) {
  Rng rng(1);
  std::vector<Real> r(12), v(12);
  std::vector<std::uint8_t> d(12);
  for (std::size_t i = 0; i < 12; ++i) {
    r[i] = rng.normal();
    v[i] = rng.normal();
    d[i] = rng.uniform() < 0.3;
  }
  const Real bootstrap = 0.7f, gamma = 0.9f;
  const auto g = gae(r, v, d, bootstrap, gamma, 0);
  for (std::size_t t = 0; t < 12; ++t) {
    const Real next = t + 1 < 12 ? v[t + 1] : bootstrap;
    const Real delta = r[t] + gamma * next * (d[t] ? 0 : 1) - v[t];
    EXPECT_NEAR(g.advantages[t], delta, 1e-6);
    EXPECT_NEAR(g.targets[t], delta + v[t], 1e-6);
  }
}

TEST(Gae, ThreeStepMatchesDirectSum) {
  const std::vector<Real> r{0.5f, -1.0f, 2.0f}, v{0.1f, 0.2f, -0.3f};
  const std::vector<std::uint8_t> d{0, 0, 0};
  const double gamma = 0.99, lambda = 0.95, boot = 0.4;
  const double d0 = 0.5 + gamma * 0.2 - 0.1, d1 = -1.0 + gamma * -0.3 - 0.2, d2 = 2.0 + gamma * boot + 0.3;
  const auto g = gae(r, v, d, Real(boot), Real(gamma), Real(lambda));
  const double gl = gamma * lambda;
  EXPECT_NEAR(g.advantages[0], d0 + gl * d1 + gl * gl * d2, 1e-5);
  EXPECT_NEAR(g.advantages[1], d1 + gl * d2, 1e-5);
  EXPECT_NEAR(g.advantages[2], d2, 1e-5);
}

TEST(Gae, ExhaustiveAgainstBruteForceUpToLengthTen) {
  Rng rng(2024);
  std::size_t cases = 0;
  for (std::size_t n = 1; n <= 10; ++n) {
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<Real> r(n), v(n);
      std::vector<std::uint8_t> d(n);
      for (std::size_t i = 0; i < n; ++i) {
        r[i] = rng.uniform(-2, 2);
        v[i] = rng.uniform(-2, 2);
        d[i] = (mask >> i) & 1;
      }
      const Real boot = rng.uniform(-2, 2), gamma = rng.uniform(0.5f, 1), lambda = rng.uniform(0.01f, 1);
      const auto g = gae(r, v, d, boot, gamma, lambda);
      const auto oracle = brute_force_gae(r, v, d, boot, gamma, lambda);
      for (std::size_t t = 0; t < n; ++t) {
        ASSERT_NEAR(g.advantages[t], oracle[t], 1e-4) << "n=" << n << " mask=" << mask << " t=" << t;
        ASSERT_NEAR(g.targets[t], oracle[t] + v[t], 1e-4);
      }
      ++cases;
    }
  }
  EXPECT_EQ(cases, 2046u);
}

TEST(Gae, MismatchedLengthsThrow) {
  const std::vector<Real> r{1, 2}, v{1};
  const std::vector<std::uint8_t> d{0, 0};
  EXPECT_THROW(gae(r, v, d, 0, 1, 1), DimensionError);
}

TEST(AdvantageNormalization, MeanZeroStdOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::vector<Real> a(257);
    for (auto& x : a) x = 5 + 3 * rng.normal();
    normalize_advantages(a);
    double mean = 0, var = 0;
    for (Real x : a) mean += x;
    mean /= static_cast<double>(a.size());
    for (Real x : a) var += (x - mean) * (x - mean);
    const double std = std::sqrt(var / static_cast<double>(a.size()));
    EXPECT_LT(std::abs(mean), 1e-6);
    EXPECT_NEAR(std, 1.0, 1e-6);
  }
}

TEST(AdvantageNormalization, ConstantInputStaysFinite) {
  std::vector<Real> a(10, Real(3));
  normalize_advantages(a);
  for (Real x : a) EXPECT_EQ(x, 0);
}

TEST(ClippedSurrogate, UsesClippedRatio) {
  EXPECT_FLOAT_EQ(clipped_surrogate(1.5f, 1, 0.2f), 1.2f);
  EXPECT_FLOAT_EQ(clipped_surrogate(0.5f, 1, 0.2f), 0.5f);
  EXPECT_FLOAT_EQ(clipped_surrogate(0.5f, -1, 0.2f), -0.8f);
  EXPECT_FLOAT_EQ(clipped_surrogate(1.1f, 2, 0.2f), 2.2f);
}

TEST(ClippedSurrogate, ObjectiveBoundedByClip) {
  // The surrogate never rewards a ratio beyond 1 + eps: it is at most
  // (1 + eps)|A|, and for A >= 0 its magnitude is bounded the same way.
  Rng rng(8);
  std::vector<Real> adv(5000);
  for (auto& a : adv) a = rng.normal();
  normalize_advantages(adv);
  for (Real eps : {0.1f, 0.2f, 0.3f}) {
    for (Real a : adv) {
      const Real ratio = rng.uniform(0, 5);
      const Real s = clipped_surrogate(ratio, a, eps);
      ASSERT_LE(s, (1 + eps) * std::abs(a) + 1e-6f);
      if (a >= 0) {
        ASSERT_LE(std::abs(s), (1 + eps) * std::abs(a) + 1e-6f);
      }
    }
  }
}

TEST(PpoLoss, SameAsOldPolicyWithZeroAdvantageHasZeroPolicyTerm) {
  ActorCritic model(small_policy());
  Batch b = synthetic_batch(model, 6, 1);
  std::fill(b.advantages.begin(), b.advantages.end(), Real(0));
  std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
  const PpoLoss loss = ppo_loss(model, b.gather(rows), PpoConfig{});
  EXPECT_EQ(loss.policy.item(), 0);
  EXPECT_NEAR(loss.approx_kl, 0, 1e-7);
  EXPECT_EQ(loss.clip_fraction, 0);
}

TEST(PpoLoss, RatioOnePointFiveContributesOnePointTwo) {
  ActorCritic model(small_policy());
  Batch b = synthetic_batch(model, 1, 2);
  b.old_log_probs[0] -= std::log(Real(1.5));
  b.advantages[0] = 1;
  PpoConfig cfg;
  cfg.clip = 0.2f;
  const std::size_t row = 0;
  const PpoLoss loss = ppo_loss(model, b.gather(std::span(&row, 1)), cfg);
  EXPECT_NEAR(loss.policy.item(), -1.2, 1e-5);
  EXPECT_EQ(loss.clip_fraction, 1);
}

TEST(PpoLoss, TotalCombinesTerms) {
  ActorCritic model(small_policy());
  const Batch b = synthetic_batch(model, 5, 3);
  PpoConfig cfg;
  cfg.vf_coeff = 0.7f;
  cfg.entropy_coeff = 0.05f;
  std::vector<std::size_t> rows{0, 1, 2, 3, 4};
  const PpoLoss l = ppo_loss(model, b.gather(rows), cfg);
  EXPECT_NEAR(l.total.item(), l.policy.item() + 0.7 * l.value.item() - 0.05 * l.entropy.item(), 1e-5);
  // Value term is the plain mean squared error.
  autograd::NoGradGuard g;
  const auto out = model.forward(Tensor(Shape{5, 3}, b.inputs));
  double mse = 0;
  for (std::size_t i = 0; i < 5; ++i) mse += std::pow(out.value[i] - b.targets[i], 2);
  EXPECT_NEAR(l.value.item(), mse / 5, 1e-5);
}

TEST(PpoLoss, NonFiniteRatioNamesTransition) {
  ActorCritic model(small_policy());
  Batch b = synthetic_batch(model, 10, 4);
  b.old_log_probs[7] = -std::numeric_limits<Real>::infinity();
  std::vector<std::size_t> rows{2, 7, 9};
  try {
    ppo_loss(model, b.gather(rows), PpoConfig{});
    FAIL() << "expected ContractError";
  } catch (const ContractError& e) {
    EXPECT_NE(std::string(e.what()).find("transition 7"), std::string::npos) << e.what();
  }
}

TEST(PpoUpdate, ZeroLearningRateLeavesParameters) {
  ActorCritic model(small_policy());
  const Batch b = synthetic_batch(model, 32, 5);
  PpoConfig cfg;
  cfg.learning_rate = 0;
  cfg.horizon = 16;
  cfg.n_envs = 2;
  cfg.minibatch_size = 8;
  const auto before = snapshot(model);
  nn::Adam adam(model.parameters(), {cfg.learning_rate});
  Rng rng(1);
  const UpdateStats s = ppo_update(model, adam, b, cfg, rng);
  EXPECT_EQ(snapshot(model), before);
  EXPECT_NEAR(s.approx_kl, 0, 1e-7);
  EXPECT_EQ(s.minibatches, cfg.n_epochs * 4);
}

TEST(PpoUpdate, DecreasesSurrogateOnItsBatch) {
  ActorCritic model(small_policy());
  const Batch b = synthetic_batch(model, 64, 6);
  PpoConfig cfg;
  cfg.horizon = 64;
  cfg.n_envs = 1;
  cfg.minibatch_size = 64;
  cfg.n_epochs = 1;
  cfg.learning_rate = 1e-3f;
  std::vector<std::size_t> all(64);
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double before = ppo_loss(model, b.gather(all), cfg).total.item();
  nn::Adam adam(model.parameters(), {cfg.learning_rate});
  Rng rng(1);
  ppo_update(model, adam, b, cfg, rng);
  const double after = ppo_loss(model, b.gather(all), cfg).total.item();
  EXPECT_LT(after, before);
}

TEST(PpoUpdate, ShufflingIsSeedDeterministic) {
  auto run = [](std::uint64_t seed) {
    ActorCritic model(small_policy());
    const Batch b = synthetic_batch(model, 32, 7);
    PpoConfig cfg;
    cfg.horizon = 8;
    cfg.n_envs = 4;
    cfg.minibatch_size = 8;
    cfg.n_epochs = 3;
    nn::Adam adam(model.parameters(), {cfg.learning_rate});
    Rng rng(seed);
    ppo_update(model, adam, b, cfg, rng);
    return snapshot(model);
  };
  EXPECT_EQ(run(11), run(11));
  EXPECT_NE(run(11), run(12));
}

TEST(PpoUpdate, EntropyPressureRaisesLogStd) {
  ActorCritic model(small_policy());
  Batch b = synthetic_batch(model, 16, 8);
  std::fill(b.advantages.begin(), b.advantages.end(), Real(0));
  PpoConfig cfg;
  cfg.horizon = 16;
  cfg.n_envs = 1;
  cfg.minibatch_size = 16;
  cfg.n_epochs = 1;
  cfg.vf_coeff = 0;
  cfg.entropy_coeff = 1;
  const auto before = std::vector<Real>(model.log_std().data().begin(), model.log_std().data().end());
  nn::Adam adam(model.parameters(), {cfg.learning_rate});
  Rng rng(1);
  ppo_update(model, adam, b, cfg, rng);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_GT(model.log_std()[i], before[i]);
}

TEST(PpoUpdate, WrongBatchSizeThrows) {
  ActorCritic model(small_policy());
  const Batch b = synthetic_batch(model, 10, 9);
  PpoConfig cfg;
  nn::Adam adam(model.parameters(), {});
  Rng rng(1);
  EXPECT_THROW(ppo_update(model, adam, b, cfg, rng), DimensionError);
}

TEST(PpoConfig, TablePresets) {
  const PpoConfig mc = PpoConfig::mountaincar_plls();
  EXPECT_EQ(mc.horizon, 512u);
  EXPECT_FLOAT_EQ(mc.learning_rate, 4e-4f);
  EXPECT_EQ(mc.n_epochs, 10u);
  EXPECT_EQ(mc.minibatch_size, 128u);
  EXPECT_EQ(mc.n_envs, 32u);
  EXPECT_FLOAT_EQ(mc.gamma, 0.99f);
  EXPECT_FLOAT_EQ(mc.lambda, 0.95f);
  EXPECT_FLOAT_EQ(mc.clip, 0.2f);
  EXPECT_FLOAT_EQ(mc.vf_coeff, 0.5f);
  EXPECT_FLOAT_EQ(mc.entropy_coeff, 0.01f);
  EXPECT_FLOAT_EQ(PpoConfig::mountaincar_ppo().learning_rate, 3e-4f);
  // Baseline and latent learner differ only in the learning rate.
  EXPECT_FLOAT_EQ(PpoConfig::mountaincar_ppo().reward_scale, mc.reward_scale);
  EXPECT_FLOAT_EQ(PpoConfig::pixelracer().reward_scale, 1.0f);

  const PpoConfig racer = PpoConfig::pixelracer();
  EXPECT_EQ(racer.horizon, 1000u);
  EXPECT_FLOAT_EQ(racer.learning_rate, 1e-4f);
  EXPECT_EQ(racer.minibatch_size, 1000u);
  EXPECT_EQ(racer.n_envs, 16u);
  EXPECT_FLOAT_EQ(racer.gamma, 0.99f);
  mc.validate();
  racer.validate();
}

TEST(PpoConfig, ValidationNamesField) {
  auto expect_error = [](PpoConfig c, const std::string& field) {
    try {
      c.validate();
      FAIL() << field;
    } catch (const std::invalid_argument& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  PpoConfig c;
  c.minibatch_size = 100;
  expect_error(c, "minibatch_size");
  c = {};
  c.reward_scale = 0;
  expect_error(c, "reward_scale");
  c = {};
  c.gamma = 0;
  expect_error(c, "gamma");
  c = {};
  c.lambda = 1.5f;
  expect_error(c, "lambda");
  c = {};
  c.clip = 0;
  expect_error(c, "clip");
}

TEST(PpoConfig, DescriptorRoundTrip) {
  PpoConfig c = PpoConfig::pixelracer();
  c.seed = 77;
  c.target_return = 12.5;
  const PpoConfig back = PpoConfig::from_descriptor(c.descriptor());
  EXPECT_EQ(back.descriptor().str(), c.descriptor().str());
}

TEST(ActorCritic, ParameterCounts) {
  ActorCriticConfig mc;
  mc.input_dim = 2;
  mc.hidden = {128, 64};
  mc.action_dim = 3;
  // 2*128+128, 128*64+64, mean 64*3+3, log_std 3, value 64+1.
  EXPECT_EQ(ActorCritic(mc).param_count().trainable, 384u + 8256u + 195u + 3u + 65u);

  ActorCriticConfig latent;
  latent.input_dim = 32;
  latent.hidden = {32};
  latent.action_dim = 32;
  EXPECT_EQ(ActorCritic(latent).param_count().trainable, 1056u + 1056u + 32u + 33u);

  ActorCriticConfig pixels;
  pixels.input_dim = 3 * 64 * 64;
  pixels.conv = nn::ConvStackShape{};
  pixels.hidden = {32, 32};
  pixels.action_dim = 3;
  // Conv 3->32->64->128->256 with 4x4 kernels, then 1024->32->32 and heads.
  const std::size_t conv = (3 * 16 * 32 + 32) + (32 * 16 * 64 + 64) + (64 * 16 * 128 + 128) + (128 * 16 * 256 + 256);
  EXPECT_EQ(conv, 690144u);
  EXPECT_EQ(ActorCritic(pixels).param_count().trainable, conv + 32800u + 1056u + 99u + 3u + 33u);
}

TEST(ActorCritic, ForwardShapesAndStateIndependentStd) {
  ActorCritic model(small_policy());
  const auto out = model.forward(Tensor(Shape{4, 3}, 0.5f));
  EXPECT_EQ(out.policy.mean.shape(), (Shape{4, 2}));
  EXPECT_EQ(out.policy.log_std.shape(), (Shape{4, 2}));
  EXPECT_EQ(out.value.shape(), (Shape{4}));
  EXPECT_THROW(model.forward(Tensor(Shape{4, 2})), DimensionError);
}

TEST(ActorCritic, NormalizerMapsBoxToUnitRange) {
  ActorCriticConfig a = small_policy();
  a.input_offset = {1, 2, 3};
  a.input_scale = {2, 2, 2};
  ActorCriticConfig b = small_policy();
  const ActorCritic with(a), without(b);
  autograd::NoGradGuard g;
  const auto x = with.forward(Tensor::matrix({{2, 3, 4}}));
  const auto y = without.forward(Tensor::matrix({{2, 2, 2}}));
  EXPECT_EQ(x.policy.mean[0], y.policy.mean[0]);
  EXPECT_EQ(x.value[0], y.value[0]);
}

TEST(ActorCritic, SaveLoadRoundTrip) {
  ActorCriticConfig c = small_policy(9);
  c.input_offset = {0.1f, 0.2f, 0.3f};
  c.input_scale = {1, 2, 3};
  c.init_log_std = -0.5f;
  const ActorCritic model(c);
  const auto path = std::filesystem::temp_directory_path() / "plls_test_actor_critic.bin";
  model.save(path);
  const ActorCritic back = ActorCritic::load(path);
  EXPECT_EQ(snapshot(back), snapshot(model));
  EXPECT_EQ(back.config().descriptor().str(), c.descriptor().str());
  std::filesystem::remove(path);
}

TEST(ActorCritic, ConvDescriptorRoundTrip) {
  ActorCriticConfig c;
  c.input_dim = 3 * 32 * 32;
  nn::ConvStackShape s;
  s.resolution = 32;
  s.filters = {4, 8};
  c.conv = s;
  c.hidden = {16};
  const auto back = ActorCriticConfig::from_descriptor(c.descriptor());
  ASSERT_TRUE(back.conv.has_value());
  EXPECT_EQ(back.conv->filters, s.filters);
  EXPECT_EQ(back.descriptor().str(), c.descriptor().str());
}

TEST(MakeBatch, PerEnvironmentGaeThenNormalized) {
  rollout::RolloutBatch r;
  r.n_envs = 2;
  r.horizon = 3;
  r.input_dim = 1;
  r.latent_dim = 1;
  r.action_dim = 1;
  r.inputs = {0, 1, 2, 3, 4, 5};
  r.latent_actions = r.inputs;
  r.log_probs = {-1, -1, -1, -1, -1, -1};
  r.rewards = {1, 0, 2, 0, 1, 1};
  r.values = {0.5f, 0.2f, 0.1f, 0.3f, 0.3f, 0.3f};
  r.dones = {0, 1, 0, 0, 0, 0};
  r.bootstrap = {0.4f, -0.2f};
  PpoConfig cfg;
  const Batch b = make_batch(r, cfg);
  std::vector<double> raw;
  for (std::size_t e = 0; e < 2; ++e) {
    const std::vector<Real> rew(r.rewards.begin() + 3 * e, r.rewards.begin() + 3 * e + 3);
    const std::vector<Real> val(r.values.begin() + 3 * e, r.values.begin() + 3 * e + 3);
    const std::vector<std::uint8_t> dn(r.dones.begin() + 3 * e, r.dones.begin() + 3 * e + 3);
    const auto o = brute_force_gae(rew, val, dn, r.bootstrap[e], 0.99, 0.95);
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_NEAR(b.targets[3 * e + t], o[t] + val[t], 1e-5);
      raw.push_back(o[t]);
    }
  }
  double mean = 0, var = 0;
  for (double x : raw) mean += x / 6;
  for (double x : raw) var += (x - mean) * (x - mean) / 6;
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(b.advantages[i], (raw[i] - mean) / std::sqrt(var), 1e-4);
}

TEST(Trainer, SameSeedSameRun) {
  const envs::EnvSpec spec{"mountaincar"};
  IdentityRepresentation rep(2, 1);
  auto run = [&] {
    ActorCritic m = mountaincar_policy();
    const auto r = train_policy(spec, m, rep, tiny_config());
    return std::make_pair(snapshot(m), r.evals.back().mean_return);
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, WritesRunDirectory) {
  const auto dir = std::filesystem::temp_directory_path() / "plls_test_trainer_run";
  std::filesystem::remove_all(dir);
  ActorCritic m = mountaincar_policy();
  IdentityRepresentation rep(2, 1);
  TrainOptions o;
  o.run_dir = dir;
  const auto r = train_policy(envs::EnvSpec{"mountaincar"}, m, rep, tiny_config(), o);
  EXPECT_EQ(r.iterations, 4u);
  EXPECT_EQ(r.metrics.size(), 4u);
  EXPECT_EQ(r.evals.size(), 2u);
  const std::string metrics = slurp(dir / "metrics.csv");
  EXPECT_EQ(metrics.substr(0, metrics.find('\n')), "iteration,mean_return,policy_loss,value_loss,entropy,kl,clip_fraction");
  EXPECT_EQ(std::count(metrics.begin(), metrics.end(), '\n'), 5);
  const std::string evals = slurp(dir / "eval.csv");
  EXPECT_EQ(evals.substr(0, evals.find('\n')), "iteration,mean_return,std_return,mean_length,goal_rate");
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints" / "policy_2.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoints" / "policy_4.bin"));
  EXPECT_EQ(snapshot(ActorCritic::load(dir / "policy.bin")), snapshot(m));
  std::filesystem::remove_all(dir);
}

TEST(Trainer, ResumeMatchesUninterruptedRun) {
  const envs::EnvSpec spec{"mountaincar"};
  IdentityRepresentation rep(2, 1);
  const auto base = std::filesystem::temp_directory_path();
  const auto straight = base / "plls_test_resume_a", resumed = base / "plls_test_resume_b";
  std::filesystem::remove_all(straight);
  std::filesystem::remove_all(resumed);

  PpoConfig cfg = tiny_config();
  cfg.total_iterations = 6;
  ActorCritic a = mountaincar_policy();
  TrainOptions oa;
  oa.run_dir = straight;
  train_policy(spec, a, rep, cfg, oa);

  // Interrupted after iteration 3 (the CSVs hold a row past the last
  // checkpoint at 2), then resumed from a fresh model.
  PpoConfig first = cfg;
  ActorCritic b = mountaincar_policy();
  TrainOptions ob;
  ob.run_dir = resumed;
  ob.on_iteration = [](const IterationRecord& r) {
    if (r.iteration == 3) throw std::runtime_error("interrupted");
  };
  EXPECT_THROW(train_policy(spec, b, rep, first, ob), std::runtime_error);
  ActorCritic c = mountaincar_policy();
  ob.on_iteration = {};
  ob.resume = true;
  const auto r = train_policy(spec, c, rep, cfg, ob);
  EXPECT_EQ(r.metrics.front().iteration, 3u);
  EXPECT_EQ(snapshot(c), snapshot(a));
  EXPECT_EQ(slurp(resumed / "metrics.csv"), slurp(straight / "metrics.csv"));
  EXPECT_EQ(slurp(resumed / "eval.csv"), slurp(straight / "eval.csv"));
  std::filesystem::remove_all(straight);
  std::filesystem::remove_all(resumed);
}

TEST(Trainer, ResumeRejectsDifferentConfig) {
  const envs::EnvSpec spec{"mountaincar"};
  IdentityRepresentation rep(2, 1);
  const auto dir = std::filesystem::temp_directory_path() / "plls_test_resume_mismatch";
  std::filesystem::remove_all(dir);
  ActorCritic a = mountaincar_policy();
  TrainOptions o;
  o.run_dir = dir;
  train_policy(spec, a, rep, tiny_config(), o);
  PpoConfig other = tiny_config();
  other.learning_rate = 1e-2f;
  o.resume = true;
  ActorCritic b = mountaincar_policy();
  EXPECT_THROW(train_policy(spec, b, rep, other, o), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST(Trainer, MismatchedPolicyRejected) {
  ActorCriticConfig c;
  c.input_dim = 3;
  ActorCritic m(c);
  IdentityRepresentation rep(2, 1);
  EXPECT_THROW(train_policy(envs::EnvSpec{"mountaincar"}, m, rep, tiny_config()), DimensionError);
}

TEST(MakeBatch, RewardScaleEntersTargetsOnly) {
  rollout::RolloutBatch r;
  r.n_envs = 1;
  r.horizon = 4;
  r.input_dim = r.latent_dim = r.action_dim = 1;
  r.inputs = r.latent_actions = {0, 1, 2, 3};
  r.log_probs = {-1, -1, -1, -1};
  r.rewards = {-0.5f, 0, 100, -1};
  r.values = {0.1f, 0.2f, 0.3f, 0.4f};
  r.dones = {0, 0, 1, 0};
  r.bootstrap = {0.5f};
  PpoConfig cfg;
  cfg.reward_scale = Real(0.01);
  const Batch b = make_batch(r, cfg);
  std::vector<Real> scaled;
  for (Real x : r.rewards) scaled.push_back(x * cfg.reward_scale);
  const auto o = brute_force_gae(scaled, r.values, r.dones, r.bootstrap[0], 0.99, 0.95);
  for (std::size_t t = 0; t < 4; ++t) EXPECT_NEAR(b.targets[t], o[t] + r.values[t], 1e-6);
  // The stored rollout keeps raw rewards for reporting.
  EXPECT_EQ(r.rewards[2], 100);
}
