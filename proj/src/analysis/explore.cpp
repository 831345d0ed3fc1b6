#include "plls/analysis/explore.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::analysis {

namespace {

constexpr std::uint64_t kMultiStream = 0x3a17;
constexpr std::uint64_t kOneStream = 0x3a18;
constexpr std::uint64_t kBaseStream = 0x3a19;
constexpr std::uint64_t kDrawStream = 0x3a1a;
constexpr std::uint64_t kStructureStream = 0x3a1b;

struct Encoded {
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> std;
  std::vector<double> recon;
};

void require_scalar_actions(const vae::VaeModel& va) {
  if (va.config().kind != vae::VaeKind::Mlp || va.config().input_dim != 1) {
    throw std::invalid_argument("latent exploration needs a one-dimensional action model");
  }
}

Encoded encode(const vae::VaeModel& va, const std::vector<double>& actions) {
  require_scalar_actions(va);
  const std::size_t n = actions.size(), d = va.latent_dim();
  autograd::NoGradGuard guard;
  const Tensor x(Shape{n, 1}, std::vector<Real>(actions.begin(), actions.end()));
  const auto params = va.encode(x);
  const Tensor recon = va.decode(params.mean);
  Encoded e;
  e.mean.assign(n, std::vector<double>(d));
  e.std.assign(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      e.mean[i][j] = params.mean[i * d + j];
      e.std[i][j] = std::exp(double(params.log_std[i * d + j]));
    }
  }
  e.recon.assign(recon.data().begin(), recon.data().end());
  return e;
}

std::vector<double> decode(const vae::VaeModel& va, const std::vector<std::vector<double>>& latents) {
  const std::size_t d = va.latent_dim();
  std::vector<Real> flat;
  for (const auto& z : latents) flat.insert(flat.end(), z.begin(), z.end());
  autograd::NoGradGuard guard;
  const Tensor out = va.decode(Tensor(Shape{latents.size(), d}, std::move(flat)));
  return {out.data().begin(), out.data().end()};
}

std::vector<LatentRecord> make_records(const std::vector<double>& actions, const Encoded& e) {
  std::vector<LatentRecord> records(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) {
    records[i].action = actions[i];
    records[i].latent = e.mean[i];
    records[i].recon = e.recon[i];
    records[i].sign_class = actions[i] > 0 ? 1 : 0;
  }
  assign_colors(records);
  return records;
}

double negative_action(Rng& rng) { return -1.0 + double(rng.uniform()); }  // [-1, 0)
double positive_action(Rng& rng) { return 1.0 - double(rng.uniform()); }   // (0, 1]

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void latent_header(std::ostream& out, std::size_t d) {
  static const char* names[] = {"l", "m", "n"};
  for (std::size_t j = 0; j < d; ++j) out << ',' << (j < 3 ? names[j] : "z" + std::to_string(j));
}

}  // namespace

void assign_colors(std::vector<LatentRecord>& records) {
  if (records.empty()) return;
  const std::size_t dims = std::min<std::size_t>(3, records.front().latent.size());
  for (std::size_t j = 0; j < 3; ++j) {
    if (j >= dims) {
      for (auto& r : records) r.color[j] = 0;
      continue;
    }
    double lo = records.front().latent[j], hi = lo;
    for (const auto& r : records) {
      lo = std::min(lo, r.latent[j]);
      hi = std::max(hi, r.latent[j]);
    }
    for (auto& r : records) r.color[j] = hi > lo ? std::clamp((r.latent[j] - lo) / (hi - lo), 0.0, 1.0) : 0.0;
  }
}

MultiStepResult explore_multi_step(const vae::VaeModel& va, std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kMultiStream));
  std::vector<double> actions(n);
  for (auto& a : actions) a = double(rng.uniform(-1, 1));
  const Encoded e = encode(va, actions);

  MultiStepResult out;
  out.records = make_records(actions, e);
  envs::McState raw = kMultiStepStart, rec = kMultiStepStart;
  out.raw.push_back({0, raw.position, raw.velocity});
  out.recon.push_back({0, rec.position, rec.velocity});
  double deviation = 0;
  for (std::size_t t = 0; t < n; ++t) {
    raw = envs::mc_step(raw, actions[t]).state;
    rec = envs::mc_step(rec, e.recon[t]).state;
    out.raw.push_back({t + 1, raw.position, raw.velocity});
    out.recon.push_back({t + 1, rec.position, rec.velocity});
    deviation += std::abs(raw.position - rec.position);
  }
  out.mean_position_deviation = n ? deviation / double(n) : 0.0;
  return out;
}

OneStepResult explore_one_step(const vae::VaeModel& va, std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kOneStream));
  std::vector<double> actions(n);
  for (std::size_t i = 0; i < n; ++i) actions[i] = i < n / 2 ? negative_action(rng) : positive_action(rng);
  const Encoded e = encode(va, actions);

  OneStepResult out;
  out.records = make_records(actions, e);
  for (std::size_t i = 0; i < n; ++i) {
    out.transitions.push_back({actions[i], e.recon[i], envs::mc_step(kOneStepStart, actions[i]).state,
                               envs::mc_step(kOneStepStart, e.recon[i]).state});
  }
  return out;
}

std::vector<double> neighbor_bases(std::uint64_t seed) {
  Rng rng(derive_seed(seed, kBaseStream));
  std::vector<double> bases;
  for (int i = 0; i < 5; ++i) bases.push_back(negative_action(rng));
  for (int i = 0; i < 5; ++i) bases.push_back(positive_action(rng));
  return bases;
}

std::vector<NeighborFan> neighbor_generalization(const vae::VaeModel& va, const std::vector<double>& bases,
                                                 std::size_t k, std::uint64_t seed) {
  const Encoded e = encode(va, bases);
  const std::size_t d = va.latent_dim();
  Rng rng(derive_seed(seed, kDrawStream));
  std::vector<NeighborFan> fans(bases.size());
  std::vector<std::vector<double>> latents;
  for (std::size_t b = 0; b < bases.size(); ++b) {
    fans[b].base = bases[b];
    fans[b].mean = e.mean[b];
    fans[b].std = e.std[b];
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> z(d);
      for (std::size_t j = 0; j < d; ++j) z[j] = e.mean[b][j] + e.std[b][j] * double(rng.normal());
      latents.push_back(z);
    }
  }
  const auto decoded = decode(va, latents);
  for (std::size_t b = 0; b < bases.size(); ++b) {
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t row = b * k + i;
      fans[b].draws.push_back({latents[row], decoded[row], envs::mc_step(kOneStepStart, decoded[row]).state});
    }
  }
  return fans;
}

double sign_agreement(const std::vector<NeighborFan>& fans) {
  std::size_t agree = 0, total = 0;
  for (const auto& f : fans) {
    for (const auto& draw : f.draws) {
      agree += (draw.decoded > 0) == (f.base > 0);
      ++total;
    }
  }
  return total ? double(agree) / double(total) : 0.0;
}

double linear_separability(const std::vector<std::vector<double>>& points, const std::vector<int>& labels) {
  if (points.size() != labels.size() || points.size() < 2) {
    throw std::invalid_argument("linear_separability: need at least two labelled points");
  }
  const std::size_t half = points.size() / 2, d = points.front().size();
  // Standardize with training statistics so a fixed step size suits any scale.
  std::vector<double> mu(d, 0), sd(d, 0);
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += points[i][j] / double(half);
  for (std::size_t i = 0; i < half; ++i)
    for (std::size_t j = 0; j < d; ++j) sd[j] += (points[i][j] - mu[j]) * (points[i][j] - mu[j]) / double(half);
  for (auto& s : sd) s = s > 0 ? std::sqrt(s) : 1.0;
  auto feature = [&](std::size_t i, std::size_t j) { return (points[i][j] - mu[j]) / sd[j]; };

  std::vector<double> w(d + 1, 0);
  for (int step = 0; step < 2000; ++step) {
    std::vector<double> g(d + 1, 0);
    for (std::size_t i = 0; i < half; ++i) {
      double s = w[d];
      for (std::size_t j = 0; j < d; ++j) s += w[j] * feature(i, j);
      const double err = 1 / (1 + std::exp(-s)) - labels[i];
      for (std::size_t j = 0; j < d; ++j) g[j] += err * feature(i, j);
      g[d] += err;
    }
    for (std::size_t j = 0; j <= d; ++j) w[j] -= 1.0 * g[j] / double(half);
  }
  std::size_t correct = 0;
  for (std::size_t i = half; i < points.size(); ++i) {
    double s = w[d];
    for (std::size_t j = 0; j < d; ++j) s += w[j] * feature(i, j);
    correct += (s > 0) == (labels[i] == 1);
  }
  return double(correct) / double(points.size() - half);
}

double record_separability(const std::vector<LatentRecord>& records) {
  std::vector<std::vector<double>> points;
  std::vector<int> labels;
  for (std::size_t parity : {0, 1}) {
    for (std::size_t i = parity; i < records.size(); i += 2) {
      points.push_back(records[i].latent);
      labels.push_back(records[i].sign_class);
    }
  }
  return linear_separability(points, labels);
}

LatentStructure latent_structure(const vae::VaeModel& va, std::size_t n, std::uint64_t seed) {
  if (n < 3) throw std::invalid_argument("latent_structure: need at least three actions");
  Rng rng(derive_seed(seed, kStructureStream));
  std::vector<double> actions(n);
  for (auto& a : actions) a = double(rng.uniform(-1, 1));
  const Encoded e = encode(va, actions);

  LatentStructure s;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = actions[i] > 0;
  s.separability = linear_separability(e.mean, labels);

  auto dist = [&](std::size_t a, std::size_t b) {
    double sum = 0;
    for (std::size_t j = 0; j < e.mean[a].size(); ++j) sum += (e.mean[a][j] - e.mean[b][j]) * (e.mean[a][j] - e.mean[b][j]);
    return sum;
  };
  std::size_t ordered = 0, triples = 0;
  for (std::size_t t = 0; t + 2 < n; t += 3) {
    std::array<std::size_t, 3> idx{t, t + 1, t + 2};
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return actions[a] < actions[b]; });
    ordered += dist(idx[0], idx[1]) < dist(idx[0], idx[2]);
    ++triples;
  }
  s.triple_order = double(ordered) / double(triples);

  std::size_t close = 0;
  for (std::size_t i = 0; i < n; ++i) close += std::abs(e.recon[i] - actions[i]) <= 0.1;
  s.round_trip = double(close) / double(n);
  return s;
}

void write_latent_csv(std::ostream& out, const std::vector<LatentRecord>& records) {
  const std::size_t d = records.empty() ? 3 : records.front().latent.size();
  out << "action";
  latent_header(out, d);
  out << ",recon,class,R,G,B\n";
  for (const auto& r : records) {
    out << fmt(r.action);
    for (double z : r.latent) out << ',' << fmt(z);
    out << ',' << fmt(r.recon) << ',' << r.sign_class;
    for (double c : r.color) out << ',' << fmt(c);
    out << '\n';
  }
}

void write_trace_csv(std::ostream& out, const MultiStepResult& result) {
  out << "t,x,xdot,variant\n";
  for (const auto& p : result.raw) out << p.t << ',' << fmt(p.x) << ',' << fmt(p.xdot) << ",raw\n";
  for (const auto& p : result.recon) out << p.t << ',' << fmt(p.x) << ',' << fmt(p.xdot) << ",recon\n";
}

void write_transition_csv(std::ostream& out, const std::vector<Transition>& transitions) {
  out << "action,recon,x,xdot,x_recon,xdot_recon,class\n";
  for (const auto& t : transitions) {
    out << fmt(t.action) << ',' << fmt(t.recon) << ',' << fmt(t.raw_next.position) << ','
        << fmt(t.raw_next.velocity) << ',' << fmt(t.recon_next.position) << ',' << fmt(t.recon_next.velocity) << ','
        << (t.action > 0 ? 1 : 0) << '\n';
  }
}

void write_neighbor_csv(std::ostream& out, const std::vector<NeighborFan>& fans) {
  const std::size_t d = fans.empty() ? 3 : fans.front().mean.size();
  out << "base,draw";
  latent_header(out, d);
  out << ",decoded,x,xdot\n";
  for (const auto& f : fans) {
    for (std::size_t i = 0; i < f.draws.size(); ++i) {
      const auto& draw = f.draws[i];
      out << fmt(f.base) << ',' << i;
      for (double z : draw.latent) out << ',' << fmt(z);
      out << ',' << fmt(draw.decoded) << ',' << fmt(draw.next.position) << ',' << fmt(draw.next.velocity) << '\n';
    }
  }
}

}  // namespace plls::inline PLLS_ABI::analysis
