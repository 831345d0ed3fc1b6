#include "plls/ppo/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "plls/io.hpp"
#include "plls/nn/adam.hpp"

namespace plls::inline PLLS_ABI::ppo {

namespace {

constexpr std::uint64_t kEnvStream = 0x7e;
constexpr std::uint64_t kIterationStream = 0x17e5'0000ULL;

std::uint64_t noise_seed(std::uint64_t seed, std::size_t iteration) {
  return derive_seed(seed, kIterationStream + 2 * iteration);
}
std::uint64_t shuffle_seed(std::uint64_t seed, std::size_t iteration) {
  return derive_seed(seed, kIterationStream + 2 * iteration + 1);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string state_descriptor(const ActorCritic& model, const PpoConfig& config, const envs::EnvSpec& spec) {
  return config.descriptor().str() + model.config().descriptor().str() + spec.descriptor().str();
}

void write_values(io::Writer& w, std::span<const Real> values) {
  w.u64(values.size());
  for (Real v : values) w.f64(v);
}

void read_values(io::Reader& r, std::span<Real> values, const char* what) {
  if (r.u64() != values.size()) throw io::BadMagicError(std::string("resume state: ") + what + " size mismatch");
  for (Real& v : values) v = static_cast<Real>(r.f64());
}

struct Paths {
  std::filesystem::path metrics, eval, resume, policy, checkpoints;
  explicit Paths(const std::filesystem::path& dir)
      : metrics(dir / "metrics.csv"),
        eval(dir / "eval.csv"),
        resume(dir / "resume.bin"),
        policy(dir / "policy.bin"),
        checkpoints(dir / "checkpoints") {}
};

void save_resume(const Paths& paths, const std::string& descriptor, std::size_t iteration, bool target_reached,
                 const ActorCritic& model, const nn::Adam& optimizer, const rollout::VecEnv& envs) {
  io::Writer w;
  w.u64(iteration);
  w.u8(target_reached ? 1 : 0);
  const auto params = model.parameters();
  w.u64(params.size());
  for (const auto& p : params) write_values(w, p.data());
  const auto& state = optimizer.state();
  w.u64(state.step_count);
  w.u64(state.first_moment.size());
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    write_values(w, state.first_moment[i]);
    write_values(w, state.second_moment[i]);
  }
  const auto env_state = envs.snapshot();
  w.u64(env_state.size());
  w.bytes(env_state.data(), env_state.size());
  w.save(paths.resume, io::FileKind::TrainerState, descriptor);
}

struct Resumed {
  std::size_t iteration = 0;
  bool target_reached = false;
};

Resumed load_resume(const Paths& paths, const std::string& descriptor, ActorCritic& model, nn::Adam& optimizer,
                    rollout::VecEnv& envs) {
  auto r = io::Reader::open(paths.resume, io::FileKind::TrainerState);
  if (r.descriptor() != descriptor) {
    throw std::invalid_argument(paths.resume.string() + " was written by a different configuration");
  }
  Resumed out;
  out.iteration = r.u64();
  out.target_reached = r.u8() != 0;
  auto params = model.parameters();
  if (r.u64() != params.size()) throw io::BadMagicError("resume state: parameter count mismatch");
  for (auto& p : params) read_values(r, p.data(), "parameter");
  auto& state = optimizer.state();
  state.step_count = r.u64();
  const std::size_t moments = r.u64();
  if (moments != 0 && moments != params.size()) throw io::BadMagicError("resume state: optimizer size mismatch");
  state.first_moment.assign(moments, {});
  state.second_moment.assign(moments, {});
  for (std::size_t i = 0; i < moments; ++i) {
    state.first_moment[i].resize(params[i].numel());
    state.second_moment[i].resize(params[i].numel());
    read_values(r, state.first_moment[i], "first moment");
    read_values(r, state.second_moment[i], "second moment");
  }
  std::vector<std::uint8_t> env_state(r.u64());
  r.bytes(env_state.data(), env_state.size());
  envs.restore(env_state);
  return out;
}

// Keeps the header and the rows whose leading iteration is <= last.
void truncate_csv(const std::filesystem::path& path, std::size_t last) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot resume: missing " + path.string());
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header || std::stoull(line.substr(0, line.find(','))) <= last) kept += line + "\n";
    header = false;
  }
  in.close();
  std::ofstream(path, std::ios::trunc) << kept;
}

}  // namespace

void write_metrics_header(std::ostream& out) {
  out << "iteration,mean_return,policy_loss,value_loss,entropy,kl,clip_fraction\n";
}

void write_metrics_row(std::ostream& out, const IterationRecord& r) {
  out << r.iteration << ',' << fmt(r.mean_return) << ',' << fmt(r.update.policy_loss) << ','
      << fmt(r.update.value_loss) << ',' << fmt(r.update.entropy) << ',' << fmt(r.update.approx_kl) << ','
      << fmt(r.update.clip_fraction) << '\n';
}

void write_eval_header(std::ostream& out) { out << "iteration,mean_return,std_return,mean_length,goal_rate\n"; }

void write_eval_row(std::ostream& out, const EvalRecord& r) {
  out << r.iteration << ',' << fmt(r.mean_return) << ',' << fmt(r.std_return) << ',' << fmt(r.mean_length) << ','
      << fmt(r.goal_rate) << '\n';
}

Batch make_batch(const rollout::RolloutBatch& rollout, const PpoConfig& config) {
  Batch b;
  b.size = rollout.size();
  b.input_dim = rollout.input_dim;
  b.action_dim = rollout.latent_dim;
  b.inputs = rollout.inputs;
  b.latent_actions = rollout.latent_actions;
  b.old_log_probs = rollout.log_probs;
  b.advantages.resize(b.size);
  b.targets.resize(b.size);
  const std::size_t h = rollout.horizon;
  std::vector<Real> rewards = rollout.rewards;
  for (Real& r : rewards) r *= config.reward_scale;
  for (std::size_t e = 0; e < rollout.n_envs; ++e) {
    const std::size_t off = e * h;
    const auto g = gae(std::span(rewards).subspan(off, h), std::span(rollout.values).subspan(off, h),
                       std::span(rollout.dones).subspan(off, h), rollout.bootstrap[e], config.gamma, config.lambda);
    std::copy(g.advantages.begin(), g.advantages.end(), b.advantages.begin() + static_cast<std::ptrdiff_t>(off));
    std::copy(g.targets.begin(), g.targets.end(), b.targets.begin() + static_cast<std::ptrdiff_t>(off));
  }
  normalize_advantages(b.advantages);
  return b;
}

EvalRecord evaluate_policy(const envs::EnvSpec& spec, const ActorCritic& model, const Representation& representation,
                           std::size_t n_episodes, std::uint64_t seed) {
  const auto env = envs::make_env(spec);
  check_compatible(model, representation, *env);
  PolicyActor actor(model, representation, env->action_box(), false, seed);
  const auto result = rollout::evaluate_actor(spec, actor, n_episodes, seed);
  EvalRecord r;
  r.mean_return = result.mean;
  r.std_return = result.std;
  double length = 0, goals = 0;
  for (std::size_t i = 0; i < result.lengths.size(); ++i) {
    length += static_cast<double>(result.lengths[i]);
    goals += result.reached_goal[i];
  }
  r.mean_length = length / static_cast<double>(n_episodes);
  r.goal_rate = goals / static_cast<double>(n_episodes);
  return r;
}

TrainResult train_policy(const envs::EnvSpec& spec, ActorCritic& model, const Representation& representation,
                         const PpoConfig& config, const TrainOptions& options) {
  config.validate();
  rollout::VecEnv envs(spec, config.n_envs, derive_seed(config.seed, kEnvStream));
  check_compatible(model, representation, envs.env(0));
  nn::Adam optimizer(model.parameters(), nn::AdamHyper{config.learning_rate});
  PolicyActor actor(model, representation, envs.action_box(), true, 0);

  const bool persist = !options.run_dir.empty();
  const std::string descriptor = state_descriptor(model, config, spec);
  std::optional<Paths> paths;
  std::ofstream metrics_csv, eval_csv;
  TrainResult result;
  std::size_t start = 1;
  if (persist) {
    paths.emplace(options.run_dir);
    std::filesystem::create_directories(paths->checkpoints);
    if (options.resume && std::filesystem::exists(paths->resume)) {
      const auto resumed = load_resume(*paths, descriptor, model, optimizer, envs);
      truncate_csv(paths->metrics, resumed.iteration);
      truncate_csv(paths->eval, resumed.iteration);
      result.iterations = resumed.iteration;
      result.target_reached = resumed.target_reached;
      start = resumed.iteration + 1;
      metrics_csv.open(paths->metrics, std::ios::app);
      eval_csv.open(paths->eval, std::ios::app);
    } else {
      metrics_csv.open(paths->metrics, std::ios::trunc);
      eval_csv.open(paths->eval, std::ios::trunc);
      write_metrics_header(metrics_csv);
      write_eval_header(eval_csv);
    }
    if (!metrics_csv || !eval_csv) throw std::runtime_error("cannot write CSVs in " + options.run_dir.string());
  }
  if (result.target_reached) return result;

  for (std::size_t it = start; it <= config.total_iterations; ++it) {
    actor.reseed(noise_seed(config.seed, it));
    const auto rollout = rollout::collect_policy(envs, actor, config.horizon);
    const Batch batch = make_batch(rollout, config);
    Rng shuffle(shuffle_seed(config.seed, it));

    IterationRecord record;
    record.iteration = it;
    record.update = ppo_update(model, optimizer, batch, config, shuffle);
    record.episodes = rollout.finished.size();
    double sum = 0;
    for (const auto& f : rollout.finished) sum += f.episode_return;
    record.mean_return =
        record.episodes ? sum / static_cast<double>(record.episodes) : std::numeric_limits<double>::quiet_NaN();
    result.metrics.push_back(record);
    if (persist) write_metrics_row(metrics_csv, record), metrics_csv.flush();
    if (options.on_iteration) options.on_iteration(record);

    const bool last = it == config.total_iterations;
    if (it % config.eval_interval == 0 || last) {
      EvalRecord ev = evaluate_policy(spec, model, representation, config.eval_episodes, config.seed);
      ev.iteration = it;
      result.evals.push_back(ev);
      if (persist) write_eval_row(eval_csv, ev), eval_csv.flush();
      if (options.on_eval) options.on_eval(ev);
      result.target_reached = (!std::isnan(config.target_return) && ev.mean_return > config.target_return) ||
                              (options.stop_when && options.stop_when(ev));
    }
    result.iterations = it;
    const bool stop = last || result.target_reached;
    if (persist && (it % config.save_interval == 0 || stop)) {
      std::ostringstream name;
      name << "policy_" << it << ".bin";
      model.save(paths->checkpoints / name.str());
      model.save(paths->policy);
      save_resume(*paths, descriptor, it, result.target_reached, model, optimizer, envs);
    }
    if (stop) break;
  }
  return result;
}

}  // namespace plls::inline PLLS_ABI::ppo
