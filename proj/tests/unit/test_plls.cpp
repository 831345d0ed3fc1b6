#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plls/latent/train.hpp"

using namespace plls;
using namespace plls::latent;

namespace {

std::vector<std::vector<Real>> values_of(const std::vector<Tensor>& params) {
  std::vector<std::vector<Real>> out;
  for (const auto& p : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

ppo::PpoConfig tiny_ppo(std::uint64_t seed = 3) {
  ppo::PpoConfig c;
  c.horizon = 16;
  c.n_envs = 2;
  c.minibatch_size = 16;
  c.n_epochs = 2;
  c.total_iterations = 3;
  c.eval_interval = 3;
  c.eval_episodes = 2;
  c.save_interval = 3;
  c.seed = seed;
  return c;
}

// MountainCar action-only run shrunk to unit-test size.
PllsConfig tiny_mountaincar() {
  PllsConfig c = mountaincar_plls();
  c.collect_trajectories = 2;
  c.collect_max_len = 300;
  c.action_train_count = 500;
  c.action_vae.epochs = 2;
  c.ppo = tiny_ppo();
  c.policy_hidden = {16, 8};
  return c;
}

vae::VaeModel mountaincar_va(std::uint64_t seed = 0) {
  vae::VaeConfig c = mountaincar_action_vae();
  c.seed = seed;
  return vae::VaeModel(c);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(AblationMode, NamesRoundTrip) {
  for (auto m : {AblationMode::Both, AblationMode::StateOnly, AblationMode::ActionOnly, AblationMode::Neither}) {
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  }
  EXPECT_THROW(parse_mode("all"), std::invalid_argument);
  EXPECT_TRUE(uses_state_model(AblationMode::Both));
  EXPECT_TRUE(uses_action_model(AblationMode::Both));
  EXPECT_FALSE(uses_state_model(AblationMode::ActionOnly));
  EXPECT_FALSE(uses_action_model(AblationMode::StateOnly));
  EXPECT_FALSE(uses_state_model(AblationMode::Neither));
}

TEST(Presets, MatchTheDescribedArchitectures) {
  const PllsConfig mc = mountaincar_plls();
  EXPECT_EQ(mc.mode, AblationMode::ActionOnly);
  EXPECT_EQ(mc.collect_trajectories, 12u);
  EXPECT_EQ(mc.collect_max_len, 999u);
  EXPECT_EQ(mc.action_train_count, 8400u);
  EXPECT_EQ(mc.action_vae.latent_dim, 3u);
  EXPECT_EQ(mc.action_vae.encoder_widths, (std::vector<std::size_t>{32, 16, 8}));
  EXPECT_FLOAT_EQ(mc.action_vae.learning_rate, 1e-3f);
  EXPECT_EQ(mc.policy_hidden, (std::vector<std::size_t>{128, 64}));
  EXPECT_FLOAT_EQ(mountaincar_ppo().ppo.learning_rate, 3e-4f);
  EXPECT_EQ(mountaincar_ppo().mode, AblationMode::Neither);

  const PllsConfig racer = pixelracer_plls();
  EXPECT_EQ(racer.mode, AblationMode::Both);
  EXPECT_EQ(racer.collect_trajectories, 57u);
  EXPECT_EQ(racer.state_vae.latent_dim, 32u);
  EXPECT_EQ(racer.action_vae.latent_dim, 32u);
  EXPECT_EQ(racer.action_vae.encoder_widths, (std::vector<std::size_t>{10}));
  EXPECT_FLOAT_EQ(racer.state_vae.learning_rate, 1e-4f);
  EXPECT_FLOAT_EQ(racer.action_vae.learning_rate, 1e-4f);
  EXPECT_EQ(racer.policy_hidden, (std::vector<std::size_t>{32}));
  mc.validate();
  racer.validate();
}

TEST(Pipeline, ActionOnlyPassesRawObservations) {
  LatentPipeline p(2, 1, std::nullopt, mountaincar_va());
  EXPECT_EQ(p.state_dim(), 2u);
  EXPECT_EQ(p.latent_action_dim(), 3u);
  const std::vector<Real> obs{-0.5f, 0.01f, -0.9f, -0.02f};
  EXPECT_EQ(p.encode_states(obs, 2), obs);
}

TEST(Pipeline, StateModelUsesEncoderMean) {
  vae::VaeConfig c;
  c.input_dim = 2;
  c.encoder_widths = {6};
  c.decoder_widths = {6};
  c.latent_dim = 4;
  const vae::VaeModel vs(c);
  LatentPipeline p(2, 1, vs, std::nullopt);
  const std::vector<Real> obs{-0.5f, 0.01f};
  const auto z = p.encode_states(obs, 1);
  const auto mean = vs.encode(Tensor::matrix({{-0.5f, 0.01f}})).mean;
  ASSERT_EQ(z.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(z[i], mean[i]);
  EXPECT_EQ(p.encode_states(obs, 1), z);
}

TEST(Pipeline, RejectsMismatchedModels) {
  vae::VaeConfig c;
  c.input_dim = 3;
  c.encoder_widths = {4};
  c.decoder_widths = {4};
  c.latent_dim = 2;
  EXPECT_THROW(LatentPipeline(2, 1, vae::VaeModel(c), std::nullopt), DimensionError);
  EXPECT_THROW(LatentPipeline(2, 2, std::nullopt, mountaincar_va()), DimensionError);
}

TEST(Act, DeterministicTwiceGivesIdenticalActions) {
  const PllsConfig cfg = mountaincar_plls();
  LatentPipeline p(2, 1, std::nullopt, mountaincar_va());
  const auto env = envs::make_env(cfg.env);
  ppo::ActorCritic policy(policy_config(cfg, p, *env));
  ppo::PolicyActor a(policy, p, env->action_box(), false, 1), b(policy, p, env->action_box(), false, 2);
  const std::vector<Real> obs{-0.5f, 0.01f, -1.0f, 0.0f};
  const auto x = a.act(obs, 2), y = b.act(obs, 2);
  EXPECT_EQ(x.actions, y.actions);
  EXPECT_EQ(x.latent_actions, y.latent_actions);
  EXPECT_EQ(x.log_probs, y.log_probs);
  EXPECT_EQ(x.inputs, obs);
}

TEST(Act, DecodedActionsStayInsideTheBox) {
  // Very wide policies push the decoders' output heads into saturation; the
  // clamp handles whatever the heads leave.
  for (const char* name : {"mountaincar", "pixelracer"}) {
    envs::EnvSpec spec{name};
    spec.resolution = 64;
    const auto env = envs::make_env(spec);
    const bool mc = spec.name == "mountaincar";
    vae::VaeConfig vc = mc ? mountaincar_action_vae() : pixelracer_action_vae();
    // A small dense state model keeps the pixel case off the conv trunk.
    std::optional<vae::VaeModel> vs;
    if (!mc) {
      vae::VaeConfig sc;
      sc.input_dim = env->observation_size();
      sc.encoder_widths = {2};
      sc.decoder_widths = {2};
      sc.latent_dim = 2;
      vs.emplace(sc);
    }
    LatentPipeline p(env->observation_size(), env->action_box().dim(), vs, vae::VaeModel(vc));
    PllsConfig cfg = mc ? mountaincar_plls() : pixelracer_plls(64);
    cfg.mode = mc ? AblationMode::ActionOnly : AblationMode::Both;
    cfg.policy_hidden = {4};
    cfg.init_log_std = 3;
    ppo::ActorCritic policy(policy_config(cfg, p, *env));
    ppo::PolicyActor actor(policy, p, env->action_box(), true, 9);
    auto obs = env->reset(1);
    std::size_t checked = 0;
    const std::size_t batch = mc ? 1000 : 50;
    std::vector<Real> many;
    for (std::size_t i = 0; i < batch; ++i) many.insert(many.end(), obs.begin(), obs.end());
    while (checked < 10000) {
      const auto out = actor.act(many, batch);
      const std::size_t d = env->action_box().dim();
      for (std::size_t i = 0; i < batch; ++i) {
        ASSERT_TRUE(env->action_box().contains(std::span<const Real>(out.actions).subspan(i * d, d)));
      }
      checked += batch;
    }
  }
}

TEST(Act, LogProbMatchesNumericalDensity) {
  const PllsConfig cfg = mountaincar_plls();
  LatentPipeline p(2, 1, std::nullopt, mountaincar_va());
  const auto env = envs::make_env(cfg.env);
  ppo::ActorCritic policy(policy_config(cfg, p, *env));
  ppo::PolicyActor actor(policy, p, env->action_box(), true, 4);
  std::vector<Real> obs;
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    obs.push_back(rng.uniform(-1.2f, 0.6f));
    obs.push_back(rng.uniform(-0.07f, 0.07f));
  }
  const auto out = actor.act(obs, 200);
  autograd::NoGradGuard g;
  const auto f = policy.forward(Tensor(Shape{200, 2}, obs));
  for (std::size_t i = 0; i < 200; ++i) {
    double density = 1;
    for (std::size_t k = 0; k < 3; ++k) {
      const double mu = f.policy.mean[i * 3 + k], sigma = std::exp(double(f.policy.log_std[i * 3 + k]));
      const double u = (out.latent_actions[i * 3 + k] - mu) / sigma;
      density *= std::exp(-0.5 * u * u) / (sigma * std::sqrt(2 * M_PI));
    }
    EXPECT_NEAR(std::exp(double(out.log_probs[i])) / density, 1.0, 1e-6) << i;
  }
}

TEST(Evaluate, ZeroActionPipelineScoresZero) {
  PllsConfig cfg = mountaincar_ppo();
  cfg.policy_hidden = {8};
  cfg.mean_init_scale = 0;
  LatentPipeline p(2, 1, std::nullopt, std::nullopt);
  const auto env = envs::make_env(cfg.env);
  const ppo::ActorCritic policy(policy_config(cfg, p, *env));
  const auto r = ppo::evaluate_policy(cfg.env, policy, p, 10, 4);
  EXPECT_EQ(r.mean_return, 0);
  EXPECT_EQ(r.std_return, 0);
  EXPECT_EQ(r.mean_length, 999);
  EXPECT_EQ(r.goal_rate, 0);
}

TEST(Evaluate, SameSeedSameMeanAndStd) {
  const PllsConfig cfg = mountaincar_plls();
  LatentPipeline p(2, 1, std::nullopt, mountaincar_va());
  const auto env = envs::make_env(cfg.env);
  const ppo::ActorCritic policy(policy_config(cfg, p, *env));
  const auto a = ppo::evaluate_policy(cfg.env, policy, p, 3, 8), b = ppo::evaluate_policy(cfg.env, policy, p, 3, 8);
  EXPECT_EQ(a.mean_return, b.mean_return);
  EXPECT_EQ(a.std_return, b.std_return);
}

TEST(PolicyConfig, NormalizerForRawLowDimStatesOnly) {
  const PllsConfig cfg = mountaincar_plls();
  const auto env = envs::make_env(cfg.env);
  LatentPipeline raw(2, 1, std::nullopt, mountaincar_va());
  const auto c = policy_config(cfg, raw, *env);
  EXPECT_EQ(c.input_dim, 2u);
  EXPECT_EQ(c.action_dim, 3u);
  ASSERT_EQ(c.input_offset.size(), 2u);
  // Position spans [-1.2, 0.5], velocity [-0.07, 0.07].
  EXPECT_NEAR(c.input_offset[0], -0.35, 1e-6);
  EXPECT_NEAR(c.input_offset[1], 0.0, 1e-9);
  EXPECT_NEAR(c.input_scale[0], 2 / 1.7, 1e-6);
  EXPECT_NEAR(c.input_scale[1], 2 / 0.14, 1e-4);
  EXPECT_FALSE(c.conv.has_value());
}

TEST(PolicyConfig, PixelParameterEconomy) {
  const PllsConfig plls_cfg = pixelracer_plls(64), ppo_cfg = pixelracer_ppo(64);
  const auto env = envs::make_env(plls_cfg.env);
  LatentPipeline latent(env->observation_size(), 3, vae::VaeModel(plls_cfg.state_vae),
                        vae::VaeModel(plls_cfg.action_vae));
  LatentPipeline raw(env->observation_size(), 3, std::nullopt, std::nullopt);
  const ppo::ActorCritic small(policy_config(plls_cfg, latent, *env));
  const ppo::ActorCritic big(policy_config(ppo_cfg, raw, *env));
  EXPECT_EQ(small.param_count().trainable, 2177u);
  EXPECT_EQ(big.param_count().trainable, 724135u);
  EXPECT_LT(double(small.param_count().trainable), 0.01 * double(big.param_count().trainable));
}

TEST(TrainPlls, NeitherModeEqualsPlainPpo) {
  PllsConfig cfg = mountaincar_ppo();
  cfg.ppo = tiny_ppo(7);
  cfg.policy_hidden = {16, 8};
  const auto run = train_plls(cfg);
  EXPECT_FALSE(run.pipeline->state_model().has_value());
  EXPECT_FALSE(run.pipeline->action_model().has_value());

  // The same learner driven directly with identity maps.
  const auto env = envs::make_env(cfg.env);
  ppo::IdentityRepresentation identity(2, 1);
  ppo::ActorCritic policy(policy_config(cfg, identity, *env));
  const auto direct = ppo::train_policy(cfg.env, policy, identity, cfg.ppo);

  EXPECT_EQ(values_of(run.policy->parameters()), values_of(policy.parameters()));
  ASSERT_EQ(run.training.metrics.size(), direct.metrics.size());
  for (std::size_t i = 0; i < direct.metrics.size(); ++i) {
    EXPECT_EQ(run.training.metrics[i].update.policy_loss, direct.metrics[i].update.policy_loss);
    EXPECT_EQ(run.training.metrics[i].update.value_loss, direct.metrics[i].update.value_loss);
  }
  EXPECT_EQ(run.training.evals.back().mean_return, direct.evals.back().mean_return);
}

TEST(TrainPlls, NeitherModeRunDirectoryMatchesPlainPpoByteForByte) {
  const auto base = std::filesystem::temp_directory_path();
  const auto a = base / "plls_test_neither", b = base / "plls_test_plain";
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
  PllsConfig cfg = mountaincar_ppo();
  cfg.ppo = tiny_ppo(7);
  cfg.policy_hidden = {16, 8};
  PllsOptions o;
  o.run_dir = a;
  train_plls(cfg, o);

  const auto env = envs::make_env(cfg.env);
  ppo::IdentityRepresentation identity(2, 1);
  ppo::ActorCritic policy(policy_config(cfg, identity, *env));
  ppo::TrainOptions t;
  t.run_dir = b;
  ppo::train_policy(cfg.env, policy, identity, cfg.ppo, t);
  for (const char* f : {"metrics.csv", "eval.csv", "policy.bin", "resume.bin"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(TrainPlls, RepresentationsStayFrozen) {
  const auto dir = std::filesystem::temp_directory_path() / "plls_test_frozen";
  std::filesystem::remove_all(dir);
  PllsOptions o;
  o.run_dir = dir;
  const auto run = train_plls(tiny_mountaincar(), o);
  ASSERT_TRUE(run.pipeline->action_model().has_value());
  const auto& va = *run.pipeline->action_model();
  for (const auto& p : va.parameters()) {
    EXPECT_FALSE(p.requires_grad());
    EXPECT_FALSE(p.has_grad());
  }
  const auto saved = vae::VaeModel::load(dir / "action_vae.bin");
  EXPECT_EQ(values_of(va.parameters()), values_of(saved.parameters()));
  EXPECT_TRUE(std::filesystem::exists(dir / "action_vae_loss.csv"));
  EXPECT_TRUE(run.action.test_mse.has_value());
  EXPECT_EQ(run.training.iterations, 3u);
  std::filesystem::remove_all(dir);
}

TEST(TrainPlls, ResumeReusesRepresentationsAndMatches) {
  const auto base = std::filesystem::temp_directory_path();
  const auto a = base / "plls_test_plls_resume_a", b = base / "plls_test_plls_resume_b";
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
  PllsConfig cfg = tiny_mountaincar();
  cfg.ppo.total_iterations = 4;
  cfg.ppo.save_interval = 2;
  cfg.ppo.eval_interval = 2;
  PllsOptions oa;
  oa.run_dir = a;
  const auto straight = train_plls(cfg, oa);

  PllsOptions ob;
  ob.run_dir = b;
  ob.on_iteration = [](const ppo::IterationRecord& r) {
    if (r.iteration == 3) throw std::runtime_error("interrupted");
  };
  EXPECT_THROW(train_plls(cfg, ob), std::runtime_error);
  ob.on_iteration = {};
  ob.resume = true;
  std::vector<std::string> log;
  ob.log = [&](const std::string& s) { log.push_back(s); };
  const auto resumed = train_plls(cfg, ob);
  EXPECT_NE(std::find_if(log.begin(), log.end(), [](const std::string& s) { return s.find("resumed action VAE") == 0; }),
            log.end());
  EXPECT_EQ(values_of(resumed.policy->parameters()), values_of(straight.policy->parameters()));
  EXPECT_EQ(slurp(a / "metrics.csv"), slurp(b / "metrics.csv"));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(TrainPlls, SkipPretrainNeedsCheckpoints) {
  PllsConfig cfg = tiny_mountaincar();
  cfg.pretrain = false;
  EXPECT_THROW(train_plls(cfg), std::invalid_argument);
  EXPECT_THROW(load_pipeline(cfg.env, AblationMode::ActionOnly, std::nullopt, std::nullopt), std::invalid_argument);
}

TEST(TrainPlls, CheckpointsSkipCollection) {
  const auto path = std::filesystem::temp_directory_path() / "plls_test_va.bin";
  mountaincar_va(5).save(path);
  PllsConfig cfg = tiny_mountaincar();
  cfg.pretrain = false;
  cfg.action_checkpoint = path;
  const auto run = train_plls(cfg);
  EXPECT_TRUE(run.action.curve.empty());
  EXPECT_EQ(values_of(run.pipeline->action_model()->parameters()), values_of(mountaincar_va(5).parameters()));
  const auto loaded = load_pipeline(cfg.env, AblationMode::ActionOnly, std::nullopt, path);
  EXPECT_EQ(loaded->latent_action_dim(), 3u);
  std::filesystem::remove(path);
}
