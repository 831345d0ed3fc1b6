#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "plls/analysis/explore.hpp"
#include "plls/analysis/frames.hpp"
#include "plls/envs/pixel_racer.hpp"
#include "plls/analysis/report.hpp"
#include "plls/latent/train.hpp"

using namespace plls;
using namespace plls::analysis;

namespace {

// Action model trained in the MountainCar data regime, shared by the suite.
const vae::VaeModel& trained_va() {
  static const vae::VaeModel model = [] {
    const auto cfg = latent::mountaincar_plls();
    const auto data = rollout::collect_random(cfg.env, cfg.collect_trajectories, cfg.collect_max_len, 0);
    return latent::fit_representation(data, latent::RepresentationKind::Action, cfg.action_vae,
                                      cfg.action_train_count, 0.9)
        .trained.model;
  }();
  return model;
}

Curve curve(std::vector<double> returns) {
  Curve c;
  for (std::size_t i = 0; i < returns.size(); ++i) c.iterations.push_back((i + 1) * 10);
  c.returns = std::move(returns);
  return c;
}

template <class F, class... A>
std::string csv_of(F write, const A&... args) {
  std::ostringstream out;
  write(out, args...);
  return out.str();
}

}  // namespace

TEST(LatentStructure, TrainedActionModelMeetsTheStructureThresholds) {
  const auto s = latent_structure(trained_va(), 3000, 1);
  EXPECT_GE(s.separability, 0.95);
  EXPECT_GE(s.triple_order, 0.90);
  EXPECT_GE(s.round_trip, 0.95);
}

TEST(LatentStructure, SeparableCloudsScorePerfectly) {
  std::vector<std::vector<double>> pts;
  std::vector<int> labels;
  Rng rng(2);
  for (int i = 0; i < 400; ++i) {
    const int y = i % 2;
    pts.push_back({(y ? 8.0 : -8.0) + double(rng.normal()), double(rng.normal()) * 100});
    labels.push_back(y);
  }
  EXPECT_EQ(linear_separability(pts, labels), 1.0);
  // Labels independent of the points: chance level.
  for (auto& y : labels) y = int(rng.index(2));
  EXPECT_LT(linear_separability(pts, labels), 0.65);
}

TEST(ExploreMultiStep, TracesShareTheStartAndStayClose) {
  const auto r = explore_multi_step(trained_va(), 1000, 0);
  EXPECT_EQ(r.records.size(), 1000u);
  ASSERT_EQ(r.raw.size(), 1001u);
  ASSERT_EQ(r.recon.size(), 1001u);
  EXPECT_EQ(r.raw[0].x, -1.2);
  EXPECT_EQ(r.raw[0].xdot, 0.0);
  EXPECT_EQ(r.recon[0].x, r.raw[0].x);
  EXPECT_EQ(r.recon[0].xdot, r.raw[0].xdot);
  EXPECT_LT(r.mean_position_deviation, 0.05);
  for (const auto& rec : r.records) {
    EXPECT_GE(rec.recon, -1.0);
    EXPECT_LE(rec.recon, 1.0);
  }
}

TEST(ExploreMultiStep, DeterministicGivenModelAndSeed) {
  const auto a = explore_multi_step(trained_va(), 200, 5), b = explore_multi_step(trained_va(), 200, 5);
  EXPECT_EQ(csv_of(write_trace_csv, a), csv_of(write_trace_csv, b));
  EXPECT_EQ(csv_of(write_latent_csv, a.records), csv_of(write_latent_csv, b.records));
  EXPECT_NE(csv_of(write_trace_csv, a), csv_of(write_trace_csv, explore_multi_step(trained_va(), 200, 6)));
}

TEST(ExploreOneStep, SignClassesSplitAndSeparate) {
  const auto r = explore_one_step(trained_va(), 1000, 0);
  ASSERT_EQ(r.records.size(), 1000u);
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto& rec = r.records[i];
    EXPECT_EQ(rec.sign_class, i < 500 ? 0 : 1);
    if (i < 500) {
      EXPECT_LT(rec.action, 0);
      EXPECT_GE(rec.action, -1);
      EXPECT_LT(r.transitions[i].raw_next.velocity, 0);
    } else {
      EXPECT_GT(rec.action, 0);
      EXPECT_LE(rec.action, 1);
    }
  }
  EXPECT_GE(record_separability(r.records), 0.95);
}

TEST(ExploreOneStep, ColorsSpanTheUnitCubePerDimension) {
  const auto r = explore_one_step(trained_va(), 1000, 3);
  for (std::size_t j = 0; j < 3; ++j) {
    double lo = 1, hi = 0;
    for (const auto& rec : r.records) {
      EXPECT_GE(rec.color[j], 0.0);
      EXPECT_LE(rec.color[j], 1.0);
      lo = std::min(lo, rec.color[j]);
      hi = std::max(hi, rec.color[j]);
    }
    EXPECT_EQ(lo, 0.0);
    EXPECT_EQ(hi, 1.0);
  }
}

TEST(AssignColors, AffinePerDimensionAndConstantMapsToZero) {
  std::vector<LatentRecord> recs(3);
  recs[0].latent = {1, 5};
  recs[1].latent = {2, 5};
  recs[2].latent = {5, 5};
  assign_colors(recs);
  EXPECT_DOUBLE_EQ(recs[0].color[0], 0);
  EXPECT_DOUBLE_EQ(recs[1].color[0], 0.25);
  EXPECT_DOUBLE_EQ(recs[2].color[0], 1);
  for (const auto& r : recs) {
    EXPECT_EQ(r.color[1], 0);
    EXPECT_EQ(r.color[2], 0);
  }
}

TEST(Neighbors, FansKeepSignAndSpread) {
  const auto bases = neighbor_bases(0);
  ASSERT_EQ(bases.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(bases[i] > 0, i >= 5);
  const auto fans = neighbor_generalization(trained_va(), bases, 10, 0);
  std::size_t outputs = 0;
  for (const auto& f : fans) {
    outputs += f.draws.size();
    double mean = 0, var = 0;
    for (const auto& d : f.draws) mean += d.decoded / 10;
    for (const auto& d : f.draws) var += (d.decoded - mean) * (d.decoded - mean);
    EXPECT_GT(var, 0) << f.base;
    // Empirical latent mean within 3 sigma / sqrt(k) of the encoder mean.
    for (std::size_t j = 0; j < f.mean.size(); ++j) {
      double m = 0;
      for (const auto& d : f.draws) m += d.latent[j] / 10;
      EXPECT_LE(std::abs(m - f.mean[j]), 3 * f.std[j] / std::sqrt(10.0)) << f.base << " dim " << j;
    }
  }
  EXPECT_EQ(outputs, 100u);
  EXPECT_GE(sign_agreement(fans), 0.90);
  EXPECT_EQ(csv_of(write_neighbor_csv, fans), csv_of(write_neighbor_csv, neighbor_generalization(trained_va(), bases, 10, 0)));
}

TEST(Csv, SchemasMatchTheDocumentedColumns) {
  const auto one = explore_one_step(trained_va(), 4, 0);
  const auto latent = csv_of(write_latent_csv, one.records);
  EXPECT_EQ(latent.substr(0, latent.find('\n')), "action,l,m,n,recon,class,R,G,B");
  EXPECT_EQ(std::count(latent.begin(), latent.end(), '\n'), 5);
  const auto traces = csv_of(write_trace_csv, explore_multi_step(trained_va(), 3, 0));
  EXPECT_EQ(traces.substr(0, traces.find('\n')), "t,x,xdot,variant");
  EXPECT_EQ(std::count(traces.begin(), traces.end(), '\n'), 9);
  AggregateCurve agg = aggregate_curves({curve({1, 2})});
  const auto curves = csv_of(write_curves_csv, agg);
  EXPECT_NE(curves.find("population"), std::string::npos);
  EXPECT_NE(curves.find("\niteration,mean_return,std_return\n10,1,0\n20,2,0\n"), std::string::npos);
}

TEST(Plateau, WindowAverageCriterion) {
  std::vector<double> ramp;
  for (int i = 0; i < 30; ++i) ramp.push_back(std::min(100.0, 10.0 * (i + 1)));
  for (int i = 0; i < 30; ++i) ramp.push_back(100);
  const auto p = find_plateau(curve(ramp));
  ASSERT_TRUE(p.has_value());
  // Window averages change by 10 per step until the window holds the flat
  // part; the first change under 2% of the previous average decides.
  double prev = 0;
  std::size_t expect = 0;
  for (std::size_t i = 0; i < 10; ++i) prev += ramp[i] / 10;
  for (std::size_t i = 10; i < ramp.size(); ++i) {
    double cur = 0;
    for (std::size_t k = i - 9; k <= i; ++k) cur += ramp[k] / 10;
    if (std::abs(cur - prev) < 0.02 * std::abs(prev)) {
      expect = i;
      break;
    }
    prev = cur;
  }
  EXPECT_EQ(p->index, expect);
  EXPECT_EQ(p->iteration, (expect + 1) * 10);
  EXPECT_FALSE(find_plateau(curve(std::vector<double>(40, 0))).has_value());
  EXPECT_FALSE(find_plateau(curve({1, 2, 3})).has_value());
}

TEST(Efficiency, PixelPolicyUnderOnePercentAndRowsStable) {
  const auto plls_cfg = latent::pixelracer_plls(64), ppo_cfg = latent::pixelracer_ppo(64);
  const auto env = envs::make_env(plls_cfg.env);
  latent::LatentPipeline latent_rep(env->observation_size(), 3, vae::VaeModel(plls_cfg.state_vae),
                                    vae::VaeModel(plls_cfg.action_vae));
  latent::LatentPipeline raw(env->observation_size(), 3, std::nullopt, std::nullopt);
  const ppo::ActorCritic small(latent::policy_config(plls_cfg, latent_rep, *env));
  const ppo::ActorCritic big(latent::policy_config(ppo_cfg, raw, *env));
  std::vector<double> flat(30, 5.0);
  const std::vector<ModelEntry> models{{"plls", small.param_count(), curve(flat), 16000},
                                       {"ppo", big.param_count(), std::nullopt, 16000}};
  const auto rows = efficiency_report(models);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) EXPECT_LE(r.trainable_parameters, r.total_parameters);
  EXPECT_EQ(rows[0].trainable_parameters, 2177u);
  EXPECT_EQ(rows[1].trainable_parameters, 724135u);
  EXPECT_LT(double(rows[0].trainable_parameters), 0.01 * double(rows[1].trainable_parameters));
  EXPECT_EQ(rows[0].batches_to_convergence, 110u);
  EXPECT_EQ(rows[0].samples_to_convergence, 110u * 16000u);
  EXPECT_FALSE(rows[1].batches_to_convergence.has_value());

  const auto twice = efficiency_report({models[0], models[0]});
  EXPECT_EQ(csv_of(write_efficiency_csv, std::vector{twice[0]}), csv_of(write_efficiency_csv, std::vector{twice[1]}));
}

TEST(Aggregate, PopulationStdAndOrderInvariance) {
  const auto single = aggregate_curves({curve({1, 7, -2})});
  EXPECT_EQ(single.std, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(single.mean, (std::vector<double>{1, 7, -2}));

  const auto two = aggregate_curves({curve({3, 3}), curve({5, 5})});
  EXPECT_EQ(two.mean, (std::vector<double>{4, 4}));
  EXPECT_EQ(two.std, (std::vector<double>{1, 1}));
  EXPECT_EQ(two.trials, 2u);

  const std::vector<Curve> runs{curve({1, 4, 9}), curve({2, -1, 3}), curve({0.5, 8, 8})};
  const auto forward = aggregate_curves(runs);
  const auto backward = aggregate_curves({runs[2], runs[0], runs[1]});
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(forward.mean[i], backward.mean[i]);
    EXPECT_DOUBLE_EQ(forward.std[i], backward.std[i]);
  }
}

TEST(Aggregate, MisalignedGridsNameEveryLength) {
  try {
    aggregate_curves({curve({1, 2, 3}), curve({1, 2, 3, 4}), curve({1, 2, 3})});
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("lengths 3 4 3"), std::string::npos) << e.what();
  }
  Curve shifted = curve({1, 2});
  shifted.iterations = {5, 10};
  EXPECT_THROW(aggregate_curves({curve({1, 2}), shifted}), std::invalid_argument);
  EXPECT_THROW(aggregate_curves({}), std::invalid_argument);
}

TEST(Aggregate, ReadsRunDirectories) {
  const auto base = std::filesystem::temp_directory_path() / "plls_test_aggregate";
  std::filesystem::remove_all(base);
  std::vector<std::filesystem::path> dirs;
  for (int k = 0; k < 2; ++k) {
    dirs.push_back(base / ("run" + std::to_string(k)));
    std::filesystem::create_directories(dirs.back());
    std::ofstream(dirs.back() / "eval.csv") << "iteration,mean_return,std_return,mean_length,goal_rate\n"
                                            << "10," << 3 + 2 * k << ",0,999,0\n20," << 1 + 2 * k << ",0,999,0\n";
  }
  const auto agg = aggregate_runs(dirs);
  EXPECT_EQ(agg.iterations, (std::vector<std::size_t>{10, 20}));
  EXPECT_EQ(agg.mean, (std::vector<double>{4, 2}));
  EXPECT_EQ(agg.std, (std::vector<double>{1, 1}));
  EXPECT_THROW(read_eval_curve(base / "missing"), std::runtime_error);
  std::filesystem::remove_all(base);
}

TEST(Surfaces, PaletteColorsClassifyAsThemselves) {
  const auto cls = [](const std::array<std::uint8_t, 3>& c) {
    return classify_pixel(c[0] / Real(255), c[1] / Real(255), c[2] / Real(255));
  };
  EXPECT_EQ(cls(envs::kTrackColor), Surface::Track);
  EXPECT_EQ(cls(envs::kGrassColor), Surface::Grass);
  EXPECT_EQ(cls(envs::kGrassAltColor), Surface::Grass);
  EXPECT_EQ(cls(envs::kCarColor), Surface::Other);
  EXPECT_EQ(cls(envs::kGaugeColor), Surface::Other);
  // Mid gray sits nearer the asphalt than the grass.
  EXPECT_EQ(classify_pixel(Real(0.5), Real(0.5), Real(0.5)), Surface::Track);
}

TEST(Surfaces, RenderedFramePartitionsIntoClasses) {
  envs::PixelRacer env;
  const auto obs = env.reset(3);
  const SurfaceCounts c = count_surfaces(obs);
  EXPECT_EQ(c.track + c.grass + c.other, obs.size() / 3);
  // The car spawns on the track, so both surfaces are in view.
  EXPECT_GT(c.track, 0u);
  EXPECT_GT(c.grass, 0u);
  EXPECT_GT(c.other, 0u);
  EXPECT_THROW(count_surfaces(std::vector<Real>(10)), DimensionError);
}

TEST(Surfaces, CarWindowSitsOnTheCar) {
  const Window w = car_window(64);
  EXPECT_EQ(w.side, 16u);
  EXPECT_EQ(w.col, 24u);
  EXPECT_EQ(w.row, 40u);
  // Reset puts the car on the track: the window holds the car and asphalt.
  envs::PixelRacer env;
  const auto obs = env.reset(3);
  const SurfaceCounts c = count_surfaces(obs, 64, w);
  EXPECT_EQ(c.track + c.grass + c.other, 256u);
  EXPECT_GT(c.other, 0u);
  EXPECT_EQ(c.dominant(), Surface::Track);
  EXPECT_THROW(count_surfaces(obs, 64, Window{60, 0, 8}), std::invalid_argument);
}

TEST(Surfaces, DominantTieGoesToGrass) {
  EXPECT_EQ((SurfaceCounts{5, 5, 0}.dominant()), Surface::Grass);
  EXPECT_EQ((SurfaceCounts{6, 5, 0}.dominant()), Surface::Track);
}

TEST(Surfaces, PreservationIsBoundedAndDeterministic) {
  const auto data = rollout::collect_random({"pixelracer", 64}, 1, 40, 2);
  const auto frames = data.observation_samples();
  auto cfg = latent::pixelracer_state_vae(64);
  cfg.conv.filters = {2, 2, 2, 2};
  const vae::VaeModel model(cfg);
  const SurfacePreservation a = surface_preservation(model, *frames, 16);
  const SurfacePreservation b = surface_preservation(model, *frames, 7);
  EXPECT_EQ(a.frames, 40u);
  for (double v : {a.frame_agreement, a.pixel_agreement, a.grass_share, a.track_dominant}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  // Batch size changes nothing.
  EXPECT_EQ(a.frame_agreement, b.frame_agreement);
  EXPECT_EQ(a.pixel_agreement, b.pixel_agreement);
}
