#include "plls/cli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <ostream>

#include "plls/analysis/explore.hpp"
#include "plls/analysis/report.hpp"
#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::cli {

namespace {

constexpr std::uint64_t kEvalSeedStream = 0x7e57e5;

std::string fmt(double v, int digits = 4) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%d %H:%M:%S");
  return s.str();
}

envs::EnvSpec checked_env(const std::string& name, std::size_t resolution) {
  envs::EnvSpec spec{name, resolution};
  try {
    envs::make_env(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return spec;
}

void write_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  body(f);
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

RunConfig default_config_for(const envs::EnvSpec& env) {
  RunConfig c = preset(env.name == "pixelracer" ? "pixelracer-plls" : "mountaincar-plls");
  c.base.env = env;
  return c;
}

std::vector<std::filesystem::path> seed_dirs(const std::filesystem::path& condition_dir) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(condition_dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && name.rfind("seed", 0) == 0 && std::filesystem::exists(entry.path() / "eval.csv")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  return dirs;
}

// Runs of one condition, in seed order.
analysis::AggregateCurve aggregate_condition(const std::filesystem::path& condition_dir) {
  const auto dirs = seed_dirs(condition_dir);
  if (dirs.empty()) throw std::runtime_error("no finished runs under " + condition_dir.string());
  return analysis::aggregate_runs(dirs);
}

}  // namespace

std::filesystem::path output_root(const std::optional<std::filesystem::path>& explicit_root) {
  if (explicit_root) return *explicit_root;
  if (const char* env = std::getenv("PLLS_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

void cmd_collect(const CollectArgs& args, std::ostream& out) {
  const auto spec = checked_env(args.env, args.resolution);
  if (args.episodes == 0) throw UsageError("--episodes must be positive");
  if (args.out.empty()) throw UsageError("--out is required");
  const std::size_t max_len = args.max_len ? args.max_len : envs::make_env(spec)->step_limit();
  const auto data = rollout::collect_random(spec, args.episodes, max_len, args.seed);
  if (args.out.has_parent_path()) std::filesystem::create_directories(args.out.parent_path());
  rollout::save_dataset(data, args.out);
  out << "wrote " << data.size() << " transitions (" << data.episodes() << " episodes) to " << args.out.string()
      << '\n';
}

void cmd_train_vae(const TrainVaeArgs& args, std::ostream& out, std::ostream& err) {
  if (args.kind != "state" && args.kind != "action") {
    throw UsageError("--kind must be state or action, got '" + args.kind + "'");
  }
  if (args.out.empty()) throw UsageError("--out is required");
  RunConfig rc = args.config ? load_run_config(*args.config) : RunConfig{};
  const auto data = rollout::load_dataset(args.data);
  if (args.config) {
    if (rc.base.env.name != data.env.name || rc.base.env.resolution != data.env.resolution) {
      err << "warning: dataset environment " << data.env.name << " overrides the config's " << rc.base.env.name
          << '\n';
    }
    rc.base.env = data.env;
  } else {
    rc = default_config_for(data.env);
  }
  const bool state = args.kind == "state";
  latent::PllsConfig trial = rc.trial(state ? latent::AblationMode::StateOnly : latent::AblationMode::ActionOnly,
                                      args.seed);
  const vae::VaeConfig& vc = state ? trial.state_vae : trial.action_vae;
  try {
    vc.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto fit = latent::fit_representation(
      data, state ? latent::RepresentationKind::State : latent::RepresentationKind::Action, vc,
      state ? trial.state_train_count : trial.action_train_count,
      state ? trial.state_train_fraction : trial.action_train_fraction, [&](const vae::EpochStats& e) {
        err << "epoch " << e.epoch << " train " << fmt(e.train_loss, 6) << " val " << fmt(e.val_loss, 6) << '\n';
      });
  if (args.out.has_parent_path()) std::filesystem::create_directories(args.out.parent_path());
  fit.trained.model.save(args.out);
  const auto csv = args.out.parent_path() / (args.out.stem().string() + "_loss.csv");
  write_file(csv, [&](std::ostream& f) { vae::write_loss_csv(f, fit.trained.curve); });
  out << args.kind << " VAE: " << fit.train_size << " train / " << fit.test_size << " test samples, test MSE "
      << fmt(fit.test_mse.mean, 5) << " +- " << fmt(fit.test_mse.std, 5) << '\n';
}

RunConfig resolve_run_config(const TrainPolicyArgs& args, std::ostream& err) {
  if (args.config && args.preset) throw UsageError("give --config or --preset, not both");
  if (!args.config && !args.preset) throw UsageError("one of --config or --preset is required");
  RunConfig rc = args.config ? load_run_config(*args.config) : preset(*args.preset);
  const bool had_vae_blocks = std::any_of(rc.sections.begin(), rc.sections.end(),
                                          [](const std::string& s) { return s == "state_vae" || s == "action_vae"; });
  const bool was_plls = rc.mode == PolicyMode::Plls;
  try {
    if (args.mode) rc.mode = parse_policy_mode(*args.mode);
    if (args.ablation) {
      rc.ablations.clear();
      for (const auto& part : split(*args.ablation, ',')) rc.ablations.push_back(latent::parse_mode(part));
    }
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (args.seeds) rc.seeds = *args.seeds;
  if (args.output) rc.output = args.output;
  if (rc.mode == PolicyMode::Ppo) {
    if (had_vae_blocks || was_plls) err << "warning: mode ppo ignores the state_vae and action_vae blocks\n";
    if (args.ablation) err << "warning: mode ppo ignores --ablation\n";
    rc.ablations = {latent::AblationMode::Neither};
  }
  rc.validate();
  return rc;
}

std::filesystem::path experiment_dir(const RunConfig& config) { return output_root(config.output) / config.name; }

std::filesystem::path trial_dir(const RunConfig& config, latent::AblationMode ablation, std::uint64_t seed) {
  return experiment_dir(config) / latent::mode_name(ablation) / ("seed" + std::to_string(seed));
}

void cmd_train_policy(const TrainPolicyArgs& args, std::ostream& out, std::ostream& err) {
  const RunConfig rc = resolve_run_config(args, err);
  const auto root = experiment_dir(rc);
  std::filesystem::create_directories(root);
  write_file(root / "config.ini", [&](std::ostream& f) { write_run_config(f, rc); });
  std::ofstream log(root / "run.log", std::ios::app);

  for (const auto ablation : rc.ablations) {
    for (const auto seed : rc.seeds) {
      RunConfig single = rc;
      single.ablations = {ablation};
      single.seeds = {seed};
      const auto dir = trial_dir(rc, ablation, seed);
      std::filesystem::create_directories(dir);
      write_file(dir / "config.ini", [&](std::ostream& f) { write_run_config(f, single); });
      const std::string tag = std::string(latent::mode_name(ablation)) + " seed " + std::to_string(seed);

      latent::PllsOptions options;
      options.run_dir = dir;
      options.resume = args.resume;
      options.log = [&](const std::string& msg) {
        err << tag << ": " << msg << '\n';
        log << timestamp() << ' ' << tag << ": " << msg << '\n';
        log.flush();
      };
      options.on_eval = [&](const ppo::EvalRecord& e) {
        out << tag << " iteration " << e.iteration << ": eval " << fmt(e.mean_return, 3) << " +- "
            << fmt(e.std_return, 3) << " (length " << fmt(e.mean_length, 1) << ")\n";
        log << timestamp() << ' ' << tag << ": eval at " << e.iteration << '\n';
        log.flush();
      };
      if (rc.stop_return || rc.stop_max_length) {
        const auto ret = rc.stop_return, len = rc.stop_max_length;
        options.stop_when = [ret, len](const ppo::EvalRecord& e) {
          return (!ret || e.mean_return > *ret) && (!len || e.mean_length < *len);
        };
      }
      options.log("start");
      const auto run = latent::train_plls(single.trial(ablation, seed), options);
      options.log("finished after " + std::to_string(run.training.iterations) + " iterations");
    }
    const auto condition = root / latent::mode_name(ablation);
    try {
      const auto agg = aggregate_condition(condition);
      write_file(condition / "curves.csv", [&](std::ostream& f) { analysis::write_curves_csv(f, agg); });
    } catch (const std::invalid_argument& e) {
      err << "warning: " << latent::mode_name(ablation) << " curves not aggregated: " << e.what() << '\n';
    }
  }
}

ppo::EvalRecord cmd_eval(const EvalArgs& args, std::ostream& out) {
  if (args.episodes == 0) throw UsageError("--episodes must be positive");
  const auto rc = load_run_config(args.run / "config.ini");
  const auto trial = rc.trial(rc.ablations.front(), rc.seeds.front());
  auto checkpoint = [&](const std::optional<std::filesystem::path>& given, const char* file) {
    if (given) return given;
    const auto local = args.run / file;
    return std::filesystem::exists(local) ? std::optional(local) : std::nullopt;
  };
  const auto pipeline = latent::load_pipeline(trial.env, trial.mode, checkpoint(trial.state_checkpoint, "state_vae.bin"),
                                              checkpoint(trial.action_checkpoint, "action_vae.bin"));
  const auto policy = ppo::ActorCritic::load(args.run / "policy.bin");
  const std::uint64_t seed = args.seed ? *args.seed : derive_seed(trial.ppo.seed, kEvalSeedStream);
  const auto r = ppo::evaluate_policy(trial.env, policy, *pipeline, args.episodes, seed);
  out << "mean return " << fmt(r.mean_return, 3) << " +- " << fmt(r.std_return, 3) << " over " << args.episodes
      << " episodes (mean length " << fmt(r.mean_length, 1) << ", goal rate " << fmt(r.goal_rate, 2) << ")\n";
  return r;
}

void cmd_explore(const ExploreArgs& args, std::ostream& out) {
  if (args.mode != "multi-step" && args.mode != "one-step" && args.mode != "neighbors") {
    throw UsageError("--mode must be multi-step, one-step or neighbors, got '" + args.mode + "'");
  }
  if (args.n == 0) throw UsageError("-n must be positive");
  const auto va = vae::VaeModel::load(args.vae);
  std::filesystem::create_directories(args.out);
  if (args.mode == "multi-step") {
    const auto r = analysis::explore_multi_step(va, args.n, args.seed);
    write_file(args.out / "latent.csv", [&](std::ostream& f) { analysis::write_latent_csv(f, r.records); });
    write_file(args.out / "traces.csv", [&](std::ostream& f) { analysis::write_trace_csv(f, r); });
    out << "mean position deviation " << fmt(r.mean_position_deviation, 5) << '\n';
  } else if (args.mode == "one-step") {
    const auto r = analysis::explore_one_step(va, args.n, args.seed);
    write_file(args.out / "latent.csv", [&](std::ostream& f) { analysis::write_latent_csv(f, r.records); });
    write_file(args.out / "transitions.csv", [&](std::ostream& f) { analysis::write_transition_csv(f, r.transitions); });
    out << "sign separability " << fmt(analysis::record_separability(r.records), 4) << '\n';
  } else {
    const auto fans = analysis::neighbor_generalization(va, analysis::neighbor_bases(args.seed), 10, args.seed);
    write_file(args.out / "neighbors.csv", [&](std::ostream& f) { analysis::write_neighbor_csv(f, fans); });
    out << "sign agreement " << fmt(analysis::sign_agreement(fans), 4) << '\n';
  }
}

void cmd_report(const ReportArgs& args, std::ostream& out) {
  const int chosen = !args.runs.empty() + bool(args.ablation) + !args.efficiency.empty();
  if (chosen != 1) throw UsageError("give exactly one of --runs, --ablation or --efficiency");
  auto emit = [&](const std::function<void(std::ostream&)>& body) {
    if (args.out) write_file(*args.out, body);
    else body(out);
  };

  if (!args.runs.empty()) {
    const auto agg = analysis::aggregate_runs(args.runs);
    emit([&](std::ostream& f) { analysis::write_curves_csv(f, agg); });
    return;
  }

  if (args.ablation) {
    struct Final {
      std::string condition;
      analysis::AggregateCurve curve;
    };
    std::vector<Final> finals;
    for (const auto m : {latent::AblationMode::Neither, latent::AblationMode::StateOnly, latent::AblationMode::ActionOnly,
                         latent::AblationMode::Both}) {
      const auto dir = *args.ablation / latent::mode_name(m);
      if (!std::filesystem::is_directory(dir) || seed_dirs(dir).empty()) continue;
      auto agg = aggregate_condition(dir);
      write_file(dir / "curves.csv", [&](std::ostream& f) { analysis::write_curves_csv(f, agg); });
      finals.push_back({std::string(latent::mode_name(m)), std::move(agg)});
    }
    if (finals.empty()) throw std::runtime_error("no condition directories under " + args.ablation->string());
    std::vector<std::size_t> lengths;
    for (const auto& f : finals) lengths.push_back(f.curve.iterations.size());
    if (std::adjacent_find(lengths.begin(), lengths.end(), std::not_equal_to<>()) != lengths.end() ||
        std::any_of(finals.begin(), finals.end(),
                    [&](const Final& f) { return f.curve.iterations != finals.front().curve.iterations; })) {
      throw std::invalid_argument("conditions have different iteration grids; lengths " + join_sizes(lengths, ' '));
    }
    emit([&](std::ostream& f) {
      f << "condition,trials,final_iteration,final_mean_return,final_std_return\n";
      for (const auto& x : finals) {
        f << x.condition << ',' << x.curve.trials << ',' << x.curve.iterations.back() << ','
          << fmt(x.curve.mean.back(), 6) << ',' << fmt(x.curve.std.back(), 6) << '\n';
      }
    });
    const auto both = std::find_if(finals.begin(), finals.end(), [](const Final& f) { return f.condition == "both"; });
    if (both != finals.end()) {
      for (const auto& x : finals) {
        if (x.condition == "both" || x.condition == "neither") continue;
        out << "ordering: both (" << fmt(both->curve.mean.back(), 3) << ") >= " << x.condition << " ("
            << fmt(x.curve.mean.back(), 3) << "): " << (both->curve.mean.back() >= x.curve.mean.back() ? "yes" : "no")
            << '\n';
      }
    }
    return;
  }

  std::vector<analysis::ModelEntry> models;
  for (const auto& source : args.efficiency) {
    const bool is_file = std::filesystem::exists(source);
    const RunConfig rc = is_file ? load_run_config(source) : preset(source);
    rc.validate();
    const auto ablation = rc.ablations.front();
    const auto trial = rc.trial(ablation, rc.seeds.front());
    const auto env = envs::make_env(trial.env);
    std::optional<vae::VaeModel> vs, va;
    if (latent::uses_state_model(trial.mode)) vs.emplace(trial.state_vae);
    if (latent::uses_action_model(trial.mode)) va.emplace(trial.action_vae);
    const latent::LatentPipeline pipeline(env->observation_size(), env->action_box().dim(), std::move(vs),
                                          std::move(va));
    const ppo::ActorCritic policy(latent::policy_config(trial, pipeline, *env));
    // Frozen representation parameters count toward the total only.
    nn::ParamCount params = policy.param_count();
    for (const auto* model : {&pipeline.state_model(), &pipeline.action_model()}) {
      if (!*model) continue;
      const auto c = (*model)->param_count();
      params.total += c.total;
      params.trainable += c.trainable;
    }
    analysis::ModelEntry entry{rc.name + "/" + std::string(latent::mode_name(ablation)), params, std::nullopt,
                               trial.ppo.batch_size()};
    const auto eval = trial_dir(rc, ablation, rc.seeds.front()) / "eval.csv";
    if (std::filesystem::exists(eval)) entry.curve = analysis::read_eval_curve(eval.parent_path());
    models.push_back(std::move(entry));
  }
  const auto rows = analysis::efficiency_report(models);
  emit([&](std::ostream& f) { analysis::write_efficiency_csv(f, rows); });
}

}  // namespace plls::inline PLLS_ABI::cli
