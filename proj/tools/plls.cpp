#include <CLI11.hpp>
#include <iostream>

#include "plls/cli/commands.hpp"
#include "plls/tensor/kernels.hpp"

using namespace plls;

namespace {

constexpr int kRuntimeFailure = 1;
constexpr int kUsageError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space policy learning: data collection, representation and policy training, analysis"};
  app.require_subcommand(1);
  int workers = 0;
  app.add_option("--workers", workers, "OpenMP threads for rollouts and kernels (0: runtime default)")
      ->check(CLI::NonNegativeNumber);

  cli::CollectArgs collect;
  auto* c = app.add_subcommand("collect", "Record random-policy transitions");
  c->add_option("--env", collect.env, "Environment name")->required();
  c->add_option("--episodes", collect.episodes, "Number of trajectories");
  c->add_option("--max-len", collect.max_len, "Steps per trajectory (0: the environment's limit)");
  c->add_option("--resolution", collect.resolution, "Image side for pixel environments");
  c->add_option("--seed", collect.seed, "Collection seed");
  c->add_option("--out", collect.out, "Dataset file")->required();

  cli::TrainVaeArgs vae;
  auto* v = app.add_subcommand("train-vae", "Train a state or action VAE on a dataset");
  v->add_option("--kind", vae.kind, "state or action")->required();
  v->add_option("--data", vae.data, "Dataset file")->required();
  v->add_option("--config", vae.config, "Run configuration supplying the VAE block");
  v->add_option("--seed", vae.seed, "Split, initialization and shuffling seed");
  v->add_option("--out", vae.out, "Checkpoint file")->required();

  cli::TrainPolicyArgs policy;
  std::vector<std::uint64_t> seeds;
  auto* p = app.add_subcommand("train-policy", "Train policies for every condition and seed of a configuration");
  p->add_option("--config", policy.config, "Run configuration file");
  p->add_option("--preset", policy.preset, "Named preset instead of a file");
  p->add_option("--mode", policy.mode, "plls or ppo");
  p->add_option("--ablation", policy.ablation, "Comma-separated: both, state_only, action_only, neither");
  p->add_option("--seeds", seeds, "Trial seeds")->delimiter(',');
  p->add_option("--out", policy.output, "Output root (default: $PLLS_OUTPUT_ROOT or ./runs)");
  p->add_flag("--resume", policy.resume, "Continue from the last checkpoint of each trial");

  cli::EvalArgs eval;
  std::uint64_t eval_seed = 0;
  auto* e = app.add_subcommand("eval", "Evaluate a trained policy on fresh episodes");
  e->add_option("--run", eval.run, "Trial directory")->required();
  e->add_option("--episodes", eval.episodes, "Number of test episodes");
  auto* eval_seed_opt = e->add_option("--seed", eval_seed, "Evaluation seed");

  cli::ExploreArgs explore;
  auto* x = app.add_subcommand("explore", "Latent-space exploration of a MountainCar action VAE");
  x->add_option("--mode", explore.mode, "multi-step, one-step or neighbors")->required();
  x->add_option("--vae", explore.vae, "Action VAE checkpoint")->required();
  x->add_option("--out", explore.out, "Output directory")->required();
  x->add_option("-n", explore.n, "Number of actions");
  x->add_option("--seed", explore.seed, "Sampling seed");

  cli::ReportArgs report;
  auto* r = app.add_subcommand("report", "Aggregate learning curves or count parameters");
  r->add_option("--runs", report.runs, "Trial directories to aggregate");
  r->add_option("--ablation", report.ablation, "Experiment directory holding condition subdirectories");
  r->add_option("--efficiency", report.efficiency, "Config files or preset names to count");
  r->add_option("--out", report.out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kUsageError;
  }
  if (workers > 0) kernels::set_num_threads(workers);

  try {
    if (*c) cli::cmd_collect(collect, std::cout);
    if (*v) cli::cmd_train_vae(vae, std::cout, std::cerr);
    if (*p) {
      if (!seeds.empty()) policy.seeds = seeds;
      cli::cmd_train_policy(policy, std::cout, std::cerr);
    }
    if (*e) {
      if (eval_seed_opt->count()) eval.seed = eval_seed;
      cli::cmd_eval(eval, std::cout);
    }
    if (*x) cli::cmd_explore(explore, std::cout);
    if (*r) cli::cmd_report(report, std::cout);
  } catch (const cli::UsageError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsageError;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kRuntimeFailure;
  }
  return 0;
}
