#pragma once

#include <span>

#include "plls/vae/samples.hpp"
#include "plls/vae/vae.hpp"

namespace plls::inline PLLS_ABI::analysis {

enum class Surface { Track, Grass, Other };

/// Nearest racer palette color of one RGB pixel in [0, 1]; the car and gauge
/// colors count as Other.
Surface classify_pixel(Real r, Real g, Real b);

struct SurfaceCounts {
  std::size_t track = 0;
  std::size_t grass = 0;
  std::size_t other = 0;

  /// Dominant surface of the frame; ties go to grass.
  Surface dominant() const { return track > grass ? Surface::Track : Surface::Grass; }
};

/// Counts over a CHW frame with three channels.
SurfaceCounts count_surfaces(std::span<const Real> chw);

// Square pixel window of a square frame.
struct Window {
  std::size_t row = 0;
  std::size_t col = 0;
  std::size_t side = 0;
};

/// Side res/4 window centred on the car, which the racer draws three quarters
/// down the frame and horizontally centred.
Window car_window(std::size_t resolution);

/// Counts inside `window` of a square CHW frame.
SurfaceCounts count_surfaces(std::span<const Real> chw, std::size_t resolution, const Window& window);

struct SurfacePreservation {
  std::size_t frames = 0;
  double frame_agreement = 0;  // share of frames whose car-window surface survives reconstruction
  double pixel_agreement = 0;  // share of track or grass pixels keeping their class, whole frame
  double grass_share = 0;      // pixel_agreement of a reconstruction that paints everything grass
  double track_dominant = 0;   // share of original frames whose car window is mostly track
};

/// Compares each frame of `frames` with its deterministic reconstruction. A
/// frame's label is the dominant surface of its car window.
SurfacePreservation surface_preservation(const vae::VaeModel& model, const vae::SampleSource& frames,
                                         std::size_t batch_size = 64);

}  // namespace plls::inline PLLS_ABI::analysis
