#include "plls/latent/train.hpp"

#include <fstream>

#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::latent {

namespace {

constexpr std::uint64_t kPolicyStream = 0x9011c7;
constexpr std::uint64_t kSplitStream = 0x5b1;
constexpr std::uint64_t kNoiseStream = 0x2015e;

void say(const PllsOptions& options, const std::string& msg) {
  if (options.log) options.log(msg);
}

vae::Split split(std::shared_ptr<const vae::SampleSource> all, std::size_t count, double fraction,
                 std::uint64_t seed) {
  if (count) {
    if (count >= all->size()) {
      throw std::invalid_argument("train count " + std::to_string(count) + " leaves no test samples out of " +
                                  std::to_string(all->size()));
    }
    return vae::split_samples(std::move(all), count, seed);
  }
  return vae::split_fraction(std::move(all), fraction, seed);
}

TrainedRepresentation obtain(const char* what, const vae::VaeConfig& vae_config,
                             const std::optional<std::filesystem::path>& checkpoint, const PllsConfig& config,
                             const PllsOptions& options, const std::function<const rollout::Dataset&()>& data,
                             bool state) {
  TrainedRepresentation out;
  if (checkpoint) {
    out.model = vae::VaeModel::load(*checkpoint);
    say(options, std::string("loaded ") + what + " VAE from " + checkpoint->string());
    return out;
  }
  const std::string stem = std::string(what) + "_vae";
  if (!options.run_dir.empty() && options.resume && std::filesystem::exists(options.run_dir / (stem + ".bin"))) {
    out.model = vae::VaeModel::load(options.run_dir / (stem + ".bin"));
    say(options, std::string("resumed ") + what + " VAE from the run directory");
    return out;
  }
  if (!config.pretrain) {
    throw std::invalid_argument(std::string("pretraining disabled but no ") + what + " VAE checkpoint was given");
  }
  const auto kind = state ? RepresentationKind::State : RepresentationKind::Action;
  auto fit = fit_representation(data(), kind, vae_config, state ? config.state_train_count : config.action_train_count,
                                state ? config.state_train_fraction : config.action_train_fraction,
                                [&](const vae::EpochStats& e) {
                                  say(options, std::string(what) + " VAE epoch " + std::to_string(e.epoch) + " train " +
                                                   std::to_string(e.train_loss) + " val " +
                                                   std::to_string(e.val_loss));
                                });
  auto& trained = fit.trained;
  out.test_mse = fit.test_mse;
  say(options, std::string(what) + " VAE trained on " + std::to_string(fit.train_size) + " samples, test MSE " +
                   std::to_string(out.test_mse->mean) + " +- " + std::to_string(out.test_mse->std));
  out.curve = std::move(trained.curve);
  if (!options.run_dir.empty()) {
    trained.model.save(options.run_dir / (stem + ".bin"));
    std::ofstream csv(options.run_dir / (stem + "_loss.csv"));
    vae::write_loss_csv(csv, out.curve);
  }
  out.model = std::move(trained.model);
  return out;
}

}  // namespace

RepresentationFit fit_representation(const rollout::Dataset& data, RepresentationKind kind,
                                     const vae::VaeConfig& config, std::size_t train_count, double train_fraction,
                                     const vae::EpochCallback& on_epoch) {
  const bool state = kind == RepresentationKind::State;
  auto samples = state ? data.observation_samples() : data.action_samples();
  const auto parts = split(samples, train_count, train_fraction, derive_seed(config.seed, kSplitStream));
  auto trained = vae::train_vae(*parts.train, parts.test.get(), config, on_epoch);
  const auto mse = vae::recon_mse(trained.model, *parts.test, 10, derive_seed(config.seed, 0x3e));
  return {std::move(trained), mse, parts.train->size(), parts.test->size()};
}

void PllsConfig::validate() const {
  ppo.validate();
  if (uses_state_model(mode) && !state_checkpoint) state_vae.validate();
  if (uses_action_model(mode) && !action_checkpoint) action_vae.validate();
  if (collect_trajectories == 0) throw std::invalid_argument("plls config: collect_trajectories must be positive");
  if (collect_max_len == 0) throw std::invalid_argument("plls config: collect_max_len must be positive");
  for (double f : {state_train_fraction, action_train_fraction}) {
    if (!(f > 0 && f < 1)) throw std::invalid_argument("plls config: train fractions must lie in (0, 1)");
  }
}

vae::VaeConfig mountaincar_action_vae() {
  vae::VaeConfig c;
  c.kind = vae::VaeKind::Mlp;
  c.input_dim = 1;
  c.encoder_widths = {32, 16, 8};
  c.decoder_widths = {8, 16, 32};
  c.output_activations = {nn::Activation::Tanh};
  c.latent_dim = 3;
  c.learning_rate = Real(1e-3);
  c.batch_size = 64;
  c.epochs = 30;  // validation loss has plateaued by epoch 10; the tail trims the decode bias
  c.kl_weight = Real(0.005);
  return c;
}

vae::VaeConfig pixelracer_state_vae(std::size_t resolution) {
  vae::VaeConfig c;
  c.kind = vae::VaeKind::Conv;
  c.conv.channels = 3;
  c.conv.resolution = resolution;
  c.output_activations = {nn::Activation::Sigmoid};
  c.latent_dim = 32;
  c.learning_rate = Real(1e-4);
  c.batch_size = 32;
  c.epochs = 10;
  return c;
}

vae::VaeConfig pixelracer_action_vae() {
  vae::VaeConfig c;
  c.kind = vae::VaeKind::Mlp;
  c.input_dim = 3;
  c.encoder_widths = {10};
  c.decoder_widths = {10};
  c.output_activations = {nn::Activation::Tanh, nn::Activation::Sigmoid, nn::Activation::Sigmoid};
  c.latent_dim = 32;
  c.learning_rate = Real(1e-4);
  c.batch_size = 64;
  c.epochs = 10;
  c.kl_weight = Real(0.002);
  return c;
}

PllsConfig mountaincar_plls() {
  PllsConfig c;
  c.env.name = "mountaincar";
  c.mode = AblationMode::ActionOnly;
  c.collect_trajectories = 12;
  c.collect_max_len = 999;
  c.action_train_count = 8400;
  c.action_vae = mountaincar_action_vae();
  c.ppo = ppo::PpoConfig::mountaincar_plls();
  c.policy_hidden = {128, 64};
  // Wide initial noise: decoded actions start near the saturated ends, which
  // is what finds the goal before the action cost shrinks the policy.
  c.init_log_std = 1;
  return c;
}

PllsConfig mountaincar_ppo() {
  PllsConfig c = mountaincar_plls();
  c.mode = AblationMode::Neither;
  c.ppo = ppo::PpoConfig::mountaincar_ppo();
  return c;
}

PllsConfig pixelracer_plls(std::size_t resolution) {
  PllsConfig c;
  c.env.name = "pixelracer";
  c.env.resolution = resolution;
  c.mode = AblationMode::Both;
  c.collect_trajectories = 57;
  c.collect_max_len = 1000;
  c.state_train_count = 54000;
  c.action_train_fraction = 0.9;
  c.state_vae = pixelracer_state_vae(resolution);
  c.action_vae = pixelracer_action_vae();
  c.ppo = ppo::PpoConfig::pixelracer();
  c.policy_hidden = {32};
  return c;
}

PllsConfig pixelracer_ppo(std::size_t resolution) {
  PllsConfig c = pixelracer_plls(resolution);
  c.mode = AblationMode::Neither;
  c.policy_hidden = {32, 32};
  return c;
}

ppo::ActorCriticConfig policy_config(const PllsConfig& config, const ppo::Representation& representation,
                                     const envs::Env& env) {
  ppo::ActorCriticConfig ac;
  ac.input_dim = representation.state_dim();
  ac.action_dim = representation.latent_action_dim();
  ac.hidden = config.policy_hidden;
  ac.hidden_activation = nn::Activation::Tanh;
  ac.init_log_std = config.init_log_std;
  ac.mean_init_scale = config.mean_init_scale;
  ac.seed = derive_seed(config.ppo.seed, kPolicyStream);
  const bool raw_states = representation.state_dim() == env.observation_size() &&
                          representation.observation_size() == env.observation_size() &&
                          !uses_state_model(config.mode);
  if (raw_states) {
    const Shape shape = env.observation_shape();
    if (shape.size() == 3) {
      nn::ConvStackShape conv;
      conv.channels = shape[0];
      conv.resolution = shape[1];
      ac.conv = conv;
    } else if (const auto box = env.observation_box(); box.dim() == ac.input_dim) {
      for (std::size_t i = 0; i < box.dim(); ++i) {
        ac.input_offset.push_back((box.high[i] + box.low[i]) / 2);
        ac.input_scale.push_back(2 / (box.high[i] - box.low[i]));
      }
    }
  }
  return ac;
}

std::unique_ptr<LatentPipeline> load_pipeline(const envs::EnvSpec& env, AblationMode mode,
                                              const std::optional<std::filesystem::path>& state_checkpoint,
                                              const std::optional<std::filesystem::path>& action_checkpoint) {
  const auto e = envs::make_env(env);
  std::optional<vae::VaeModel> vs, va;
  if (uses_state_model(mode)) {
    if (!state_checkpoint) throw std::invalid_argument("mode " + std::string(mode_name(mode)) + " needs a state VAE checkpoint");
    vs = vae::VaeModel::load(*state_checkpoint);
  }
  if (uses_action_model(mode)) {
    if (!action_checkpoint) throw std::invalid_argument("mode " + std::string(mode_name(mode)) + " needs an action VAE checkpoint");
    va = vae::VaeModel::load(*action_checkpoint);
  }
  return std::make_unique<LatentPipeline>(e->observation_size(), e->action_box().dim(), std::move(vs), std::move(va));
}

PllsRun train_plls(const PllsConfig& config, const PllsOptions& options) {
  config.validate();
  if (!options.run_dir.empty()) std::filesystem::create_directories(options.run_dir);
  const auto env = envs::make_env(config.env);

  std::optional<rollout::Dataset> dataset;
  const auto data = [&]() -> const rollout::Dataset& {
    if (!dataset) {
      say(options, "collecting " + std::to_string(config.collect_trajectories) + " random trajectories");
      dataset = rollout::collect_random(config.env, config.collect_trajectories, config.collect_max_len,
                                        config.collect_seed);
    }
    return *dataset;
  };

  PllsRun run;
  if (uses_state_model(config.mode)) {
    run.state = obtain("state", config.state_vae, config.state_checkpoint, config, options, data, true);
  }
  if (uses_action_model(config.mode)) {
    run.action = obtain("action", config.action_vae, config.action_checkpoint, config, options, data, false);
  }
  dataset.reset();

  run.pipeline = std::make_unique<LatentPipeline>(env->observation_size(), env->action_box().dim(),
                                                  run.state.model, run.action.model);
  if (config.state_noise) run.pipeline->enable_state_noise(derive_seed(config.ppo.seed, kNoiseStream));
  run.policy = std::make_unique<ppo::ActorCritic>(policy_config(config, *run.pipeline, *env));
  say(options, "policy parameters: " + std::to_string(run.policy->param_count().trainable) + " trainable");

  ppo::TrainOptions train;
  train.run_dir = options.run_dir;
  train.resume = options.resume;
  train.on_iteration = options.on_iteration;
  train.on_eval = options.on_eval;
  train.stop_when = options.stop_when;
  run.training = ppo::train_policy(config.env, *run.policy, *run.pipeline, config.ppo, train);
  return run;
}

}  // namespace plls::inline PLLS_ABI::latent
