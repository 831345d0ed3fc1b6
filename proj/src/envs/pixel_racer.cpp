#include "plls/envs/pixel_racer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "plls/io.hpp"
#include "plls/rng.hpp"

namespace plls::inline PLLS_ABI::envs {

namespace {

constexpr std::size_t kControlPoints = 12;
constexpr std::size_t kSplineSamples = 64;  // per control segment
constexpr double kCarLength = 4;
constexpr double kCarWidth = 2;
constexpr double kCheckerSize = 8;
constexpr double kGaugeTopSpeed = 40;

Vec2 catmull_rom(const Vec2& p0, const Vec2& p1, const Vec2& p2, const Vec2& p3, double t) {
  const double t2 = t * t, t3 = t2 * t;
  auto axis = [&](double a, double b, double c, double d) {
    return 0.5 * (2 * b + (-a + c) * t + (2 * a - 5 * b + 4 * c - d) * t2 + (-a + 3 * b - 3 * c + d) * t3);
  };
  return {axis(p0.x, p1.x, p2.x, p3.x), axis(p0.y, p1.y, p2.y, p3.y)};
}

// Squared distance from p to segment ab and the projection parameter.
double segment_distance2(Vec2 p, Vec2 a, Vec2 b, double& t) {
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  t = len2 > 0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0;
  const double tc = std::clamp(t, 0.0, 1.0);
  const double ex = a.x + tc * dx - p.x, ey = a.y + tc * dy - p.y;
  return ex * ex + ey * ey;
}

}  // namespace

long Track::tile_at(Vec2 p) const {
  const std::size_t n = tiles();
  const double hw2 = half_width * half_width;
  long best = -1;
  double best_d2 = hw2;
  for (std::size_t i = 0; i < n; ++i) {
    double t = 0;
    const double d2 = segment_distance2(p, centerline[i], centerline[(i + 1) % n], t);
    if (t >= 0 && t < 1 && d2 <= best_d2) {
      best_d2 = d2;
      best = static_cast<long>(i);
    }
  }
  if (best >= 0) return best;
  // Outer corners between tiles: accept the tile whose end cap covers p.
  for (std::size_t i = 0; i < n; ++i) {
    double t = 0;
    if (segment_distance2(p, centerline[i], centerline[(i + 1) % n], t) <= hw2) return static_cast<long>(i);
  }
  return -1;
}

Track generate_track(std::uint64_t seed, const RacerParams& params) {
  Rng rng(derive_seed(seed, 0x7ac));
  std::vector<Vec2> control(kControlPoints);
  const double step = 2 * std::numbers::pi / kControlPoints;
  for (std::size_t i = 0; i < kControlPoints; ++i) {
    const double angle = static_cast<double>(i) * step + rng.uniform(Real(-0.3), Real(0.3)) * step;
    const double radius = params.track_radius * rng.uniform(Real(0.55), Real(1.0));
    control[i] = {radius * std::cos(angle), radius * std::sin(angle)};
  }

  std::vector<Vec2> dense;
  dense.reserve(kControlPoints * kSplineSamples);
  for (std::size_t i = 0; i < kControlPoints; ++i) {
    const auto& p0 = control[(i + kControlPoints - 1) % kControlPoints];
    const auto& p1 = control[i];
    const auto& p2 = control[(i + 1) % kControlPoints];
    const auto& p3 = control[(i + 2) % kControlPoints];
    for (std::size_t s = 0; s < kSplineSamples; ++s) {
      dense.push_back(catmull_rom(p0, p1, p2, p3, static_cast<double>(s) / kSplineSamples));
    }
  }

  std::vector<double> arc(dense.size() + 1, 0.0);
  for (std::size_t i = 0; i < dense.size(); ++i) {
    const Vec2& a = dense[i];
    const Vec2& b = dense[(i + 1) % dense.size()];
    arc[i + 1] = arc[i] + std::hypot(b.x - a.x, b.y - a.y);
  }
  const double length = arc.back();
  const auto tiles = static_cast<std::size_t>(std::floor(length / params.tile_spacing));
  const double spacing = length / static_cast<double>(tiles);

  Track track;
  track.half_width = params.half_width;
  track.centerline.reserve(tiles);
  std::size_t j = 0;
  for (std::size_t k = 0; k < tiles; ++k) {
    const double target = static_cast<double>(k) * spacing;
    while (arc[j + 1] < target) ++j;
    const double u = (target - arc[j]) / (arc[j + 1] - arc[j]);
    const Vec2& a = dense[j];
    const Vec2& b = dense[(j + 1) % dense.size()];
    track.centerline.push_back({a.x + u * (b.x - a.x), a.y + u * (b.y - a.y)});
  }
  return track;
}

TrackRaster TrackRaster::build(const Track& track) {
  TrackRaster r;
  double lo_x = track.centerline[0].x, hi_x = lo_x, lo_y = track.centerline[0].y, hi_y = lo_y;
  for (const auto& p : track.centerline) {
    lo_x = std::min(lo_x, p.x);
    hi_x = std::max(hi_x, p.x);
    lo_y = std::min(lo_y, p.y);
    hi_y = std::max(hi_y, p.y);
  }
  const double margin = track.half_width + 2;
  r.origin_x = lo_x - margin;
  r.origin_y = lo_y - margin;
  r.width = static_cast<std::size_t>(std::ceil((hi_x - lo_x + 2 * margin) / r.cell));
  r.height = static_cast<std::size_t>(std::ceil((hi_y - lo_y + 2 * margin) / r.cell));
  r.cells.assign(r.width * r.height, 0);

  const std::size_t n = track.tiles();
  const double hw2 = track.half_width * track.half_width;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = track.centerline[i], b = track.centerline[(i + 1) % n];
    const auto cell_range = [&](double lo, double hi, double origin, std::size_t limit) {
      const auto first = static_cast<long>(std::floor((lo - track.half_width - origin) / r.cell));
      const auto last = static_cast<long>(std::ceil((hi + track.half_width - origin) / r.cell));
      return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(std::max(0L, first)),
                                                 std::min(limit, static_cast<std::size_t>(std::max(0L, last))));
    };
    const auto [x0, x1] = cell_range(std::min(a.x, b.x), std::max(a.x, b.x), r.origin_x, r.width);
    const auto [y0, y1] = cell_range(std::min(a.y, b.y), std::max(a.y, b.y), r.origin_y, r.height);
    for (std::size_t cy = y0; cy < y1; ++cy) {
      for (std::size_t cx = x0; cx < x1; ++cx) {
        const Vec2 p{r.origin_x + (static_cast<double>(cx) + 0.5) * r.cell,
                     r.origin_y + (static_cast<double>(cy) + 0.5) * r.cell};
        double t = 0;
        if (segment_distance2(p, a, b, t) <= hw2) r.cells[cy * r.width + cx] = 1;
      }
    }
  }
  return r;
}

bool TrackRaster::on_track(Vec2 p) const {
  const double fx = (p.x - origin_x) / cell, fy = (p.y - origin_y) / cell;
  if (fx < 0 || fy < 0) return false;
  const auto cx = static_cast<std::size_t>(fx), cy = static_cast<std::size_t>(fy);
  if (cx >= width || cy >= height) return false;
  return cells[cy * width + cx] != 0;
}

std::vector<std::uint8_t> render_u8(const RacerState& state, const TrackRaster& raster, const RacerParams& params) {
  const std::size_t res = params.resolution;
  const std::size_t plane = res * res;
  std::vector<std::uint8_t> img(3 * plane);
  const double scale = params.view_span / static_cast<double>(res);
  const double fx = std::cos(state.heading), fy = std::sin(state.heading);
  // Right-hand side of the car in world coordinates.
  const double rx = fy, ry = -fx;
  // The car sits three quarters down the frame, facing up.
  const double car_row = 0.75 * static_cast<double>(res);
  const double half = 0.5 * static_cast<double>(res);

  auto put = [&](std::size_t row, std::size_t col, const std::array<std::uint8_t, 3>& c) {
    for (std::size_t ch = 0; ch < 3; ++ch) img[ch * plane + row * res + col] = c[ch];
  };

  for (std::size_t row = 0; row < res; ++row) {
    const double forward = (car_row - (static_cast<double>(row) + 0.5)) * scale;
    for (std::size_t col = 0; col < res; ++col) {
      const double right = ((static_cast<double>(col) + 0.5) - half) * scale;
      const Vec2 w{state.position.x + forward * fx + right * rx, state.position.y + forward * fy + right * ry};
      if (std::abs(forward) <= kCarLength / 2 && std::abs(right) <= kCarWidth / 2) {
        put(row, col, kCarColor);
      } else if (raster.on_track(w)) {
        put(row, col, kTrackColor);
      } else {
        const auto checker =
            static_cast<long>(std::floor(w.x / kCheckerSize)) + static_cast<long>(std::floor(w.y / kCheckerSize));
        put(row, col, (checker & 1) ? kGrassAltColor : kGrassColor);
      }
    }
  }

  // Speed gauge along the bottom row.
  const auto gauge = static_cast<std::size_t>(
      std::round(std::min(1.0, state.speed / kGaugeTopSpeed) * static_cast<double>(res)));
  for (std::size_t col = 0; col < gauge; ++col) put(res - 1, col, kGaugeColor);
  return img;
}

std::vector<Real> render_obs(const RacerState& state, const TrackRaster& raster, const RacerParams& params) {
  const auto bytes = render_u8(state, raster, params);
  std::vector<Real> out(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = static_cast<Real>(bytes[i]) / Real(255);
  return out;
}

PixelRacer::PixelRacer(RacerParams params) : params_(params) {
  if (params_.resolution < 16) throw std::invalid_argument("pixel racer: resolution must be at least 16");
}

std::vector<Real> PixelRacer::reset(std::uint64_t seed) {
  state_ = RacerState{};
  state_.track_seed = seed;
  state_.track = generate_track(seed, params_);
  raster_ = TrackRaster::build(state_.track);
  const Vec2 a = state_.track.centerline[0], b = state_.track.centerline[1];
  state_.position = a;
  state_.heading = std::atan2(b.y - a.y, b.x - a.x);
  state_.visited.assign(state_.track.tiles(), 0);
  return render_obs(state_, raster_, params_);
}

StepResult PixelRacer::step(std::span<const Real> action) {
  if (action.size() != 3) throw DimensionError("pixel racer takes a 3-d action");
  std::vector<Real> a(action.begin(), action.end());
  action_box().clamp(a);
  const double steer = a[0], accel = a[1], brake = a[2];
  const double dt = params_.dt;

  RacerState& s = state_;
  s.heading += steer * params_.steer_gain * s.speed * dt;
  s.speed += (accel * params_.accel_gain - brake * params_.brake_gain - params_.drag * s.speed) * dt;
  s.speed = std::max(0.0, s.speed);
  s.position.x += s.speed * std::cos(s.heading) * dt;
  s.position.y += s.speed * std::sin(s.heading) * dt;
  ++s.step_count;

  StepResult r;
  double reward = -0.1;
  const long tile = s.track.tile_at(s.position);
  if (tile < 0) {
    s.speed *= params_.offtrack_factor;
  } else if (s.speed > 0 && !s.visited[static_cast<std::size_t>(tile)]) {
    s.visited[static_cast<std::size_t>(tile)] = 1;
    ++s.visited_count;
    reward += 1000.0 / static_cast<double>(s.track.tiles());
  }
  r.reward = static_cast<Real>(reward);
  r.terminated = s.visited_count == s.track.tiles();
  r.truncated = !r.terminated && s.step_count >= params_.step_limit;
  r.observation = render_obs(s, raster_, params_);
  return r;
}

Descriptor PixelRacer::descriptor() const {
  Descriptor d;
  d.set("env", name());
  d.set("resolution", params_.resolution);
  return d;
}

std::vector<std::uint8_t> PixelRacer::snapshot() const {
  io::Writer w;
  w.u64(state_.track_seed);
  w.f64(state_.position.x);
  w.f64(state_.position.y);
  w.f64(state_.heading);
  w.f64(state_.speed);
  w.u64(state_.step_count);
  w.u64(state_.visited.size());
  w.bytes(state_.visited.data(), state_.visited.size());
  return w.body();
}

std::vector<Real> PixelRacer::restore(const std::vector<std::uint8_t>& bytes) {
  auto r = io::Reader::raw(bytes, "pixel racer snapshot");
  reset(r.u64());
  state_.position.x = r.f64();
  state_.position.y = r.f64();
  state_.heading = r.f64();
  state_.speed = r.f64();
  state_.step_count = r.u64();
  const std::uint64_t tiles = r.u64();
  if (tiles != state_.visited.size()) throw io::BadMagicError("pixel racer snapshot: tile count mismatch");
  r.bytes(state_.visited.data(), tiles);
  state_.visited_count = static_cast<std::size_t>(std::count(state_.visited.begin(), state_.visited.end(), 1));
  return render_obs(state_, raster_, params_);
}

}  // namespace plls::inline PLLS_ABI::envs
