#pragma once

#include <array>
#include <cstdint>

#include "plls/envs/env.hpp"

namespace plls::inline PLLS_ABI::envs {

struct RacerParams {
  std::size_t resolution = 64;
  std::size_t step_limit = 1000;
  double dt = 1.0 / 50;
  double steer_gain = 0.1;   // heading rate per unit speed and steer
  double accel_gain = 20;
  double brake_gain = 20;
  double drag = 0.5;         // per second, proportional to speed
  double offtrack_factor = 0.97;
  double track_radius = 70;
  double tile_spacing = 6;
  double half_width = 6;
  double view_span = 48;     // world units across the rendered frame
};

struct Vec2 {
  double x = 0;
  double y = 0;
};

// Closed track: tile i spans centerline points i and i+1 (mod N).
struct Track {
  std::vector<Vec2> centerline;
  double half_width = 6;

  std::size_t tiles() const { return centerline.size(); }
  /// Index of a tile containing p, or -1 when p is off the track.
  long tile_at(Vec2 p) const;
  bool on_track(Vec2 p) const { return tile_at(p) >= 0; }
};

Track generate_track(std::uint64_t seed, const RacerParams& params);

struct RacerState {
  std::uint64_t track_seed = 0;
  Track track;
  Vec2 position;
  double heading = 0;  // radians, 0 = +x
  double speed = 0;
  std::vector<std::uint8_t> visited;
  std::size_t visited_count = 0;
  std::size_t step_count = 0;
};

// Occupancy grid of the track in world space, used only for rendering.
struct TrackRaster {
  double origin_x = 0;
  double origin_y = 0;
  double cell = 0.5;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> cells;

  static TrackRaster build(const Track& track);
  bool on_track(Vec2 p) const;
};

/// 8-bit RGB frame, CHW, car-centric and heading-up.
std::vector<std::uint8_t> render_u8(const RacerState& state, const TrackRaster& raster, const RacerParams& params);
/// Same frame as floats in [0, 1].
std::vector<Real> render_obs(const RacerState& state, const TrackRaster& raster, const RacerParams& params);

inline constexpr std::array<std::uint8_t, 3> kTrackColor{107, 107, 107};
inline constexpr std::array<std::uint8_t, 3> kGrassColor{102, 204, 102};
inline constexpr std::array<std::uint8_t, 3> kGrassAltColor{102, 230, 102};
inline constexpr std::array<std::uint8_t, 3> kCarColor{204, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kGaugeColor{255, 255, 255};

// Procedural top-down driving task: -0.1 per frame and 1000/N for each newly
// visited tile. A tile counts as visited when the car is inside it while
// moving.
class PixelRacer final : public Env {
 public:
  explicit PixelRacer(RacerParams params = {});

  std::string name() const override { return "pixelracer"; }
  Shape observation_shape() const override { return {3, params_.resolution, params_.resolution}; }
  Box action_box() const override { return {{-1, 0, 0}, {1, 1, 1}}; }
  std::size_t step_limit() const override { return params_.step_limit; }
  std::vector<Real> reset(std::uint64_t seed) override;
  StepResult step(std::span<const Real> action) override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<PixelRacer>(*this); }
  Descriptor descriptor() const override;
  std::vector<std::uint8_t> snapshot() const override;
  std::vector<Real> restore(const std::vector<std::uint8_t>& bytes) override;

  const RacerState& state() const { return state_; }
  const RacerParams& params() const { return params_; }
  std::vector<std::uint8_t> frame_u8() const { return render_u8(state_, raster_, params_); }

 private:
  RacerParams params_;
  RacerState state_;
  TrackRaster raster_;
};

}  // namespace plls::inline PLLS_ABI::envs
