#include "plls/analysis/frames.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <numeric>

#include "plls/envs/pixel_racer.hpp"
#include "plls/config.hpp"

namespace plls::inline PLLS_ABI::analysis {

namespace {

struct PaletteEntry {
  std::array<std::uint8_t, 3> rgb;
  Surface surface;
};

constexpr std::array<PaletteEntry, 5> kPalette{{
    {envs::kTrackColor, Surface::Track},
    {envs::kGrassColor, Surface::Grass},
    {envs::kGrassAltColor, Surface::Grass},
    {envs::kCarColor, Surface::Other},
    {envs::kGaugeColor, Surface::Other},
}};

}  // namespace

Surface classify_pixel(Real r, Real g, Real b) {
  const Real px[3] = {r, g, b};
  Real best = std::numeric_limits<Real>::infinity();
  Surface surface = Surface::Other;
  for (const auto& entry : kPalette) {
    Real d = 0;
    for (int c = 0; c < 3; ++c) {
      const Real diff = px[c] - static_cast<Real>(entry.rgb[c]) / Real(255);
      d += diff * diff;
    }
    if (d < best) {
      best = d;
      surface = entry.surface;
    }
  }
  return surface;
}

SurfaceCounts count_surfaces(std::span<const Real> chw) {
  if (chw.size() % 3 != 0) throw DimensionError("count_surfaces: frame size is not a multiple of 3");
  const std::size_t plane = chw.size() / 3;
  SurfaceCounts counts;
  for (std::size_t i = 0; i < plane; ++i) {
    switch (classify_pixel(chw[i], chw[plane + i], chw[2 * plane + i])) {
      case Surface::Track: ++counts.track; break;
      case Surface::Grass: ++counts.grass; break;
      case Surface::Other: ++counts.other; break;
    }
  }
  return counts;
}

Window car_window(std::size_t resolution) {
  const std::size_t side = std::max<std::size_t>(resolution / 4, 1);
  const auto center_row = static_cast<std::size_t>(0.75 * static_cast<double>(resolution));
  const std::size_t row = std::min(center_row - std::min(center_row, side / 2), resolution - side);
  return {row, (resolution - side) / 2, side};
}

SurfaceCounts count_surfaces(std::span<const Real> chw, std::size_t resolution, const Window& window) {
  const std::size_t plane = resolution * resolution;
  if (chw.size() != 3 * plane) throw DimensionError("count_surfaces: frame is not 3 x resolution x resolution");
  if (window.row + window.side > resolution || window.col + window.side > resolution) {
    throw std::invalid_argument("count_surfaces: window leaves the frame");
  }
  SurfaceCounts counts;
  for (std::size_t r = window.row; r < window.row + window.side; ++r) {
    for (std::size_t c = window.col; c < window.col + window.side; ++c) {
      const std::size_t i = r * resolution + c;
      switch (classify_pixel(chw[i], chw[plane + i], chw[2 * plane + i])) {
        case Surface::Track: ++counts.track; break;
        case Surface::Grass: ++counts.grass; break;
        case Surface::Other: ++counts.other; break;
      }
    }
  }
  return counts;
}

SurfacePreservation surface_preservation(const vae::VaeModel& model, const vae::SampleSource& frames,
                                         std::size_t batch_size) {
  const Shape shape = frames.sample_shape();
  if (shape.size() != 3 || shape[0] != 3 || shape[1] != shape[2]) {
    throw DimensionError("surface_preservation: frames must be 3 x R x R");
  }
  if (frames.size() == 0 || batch_size == 0) throw std::invalid_argument("surface_preservation: empty input");
  const std::size_t numel = frames.sample_numel(), plane = numel / 3, res = shape[1];
  const Window window = car_window(res);
  SurfacePreservation out;
  out.frames = frames.size();
  std::size_t frame_hits = 0, track_frames = 0, pixel_hits = 0, pixels = 0, grass = 0;
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < frames.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, frames.size() - start);
    indices.resize(n);
    std::iota(indices.begin(), indices.end(), start);
    const Tensor x = frames.batch(indices);
    const Tensor recon = vae::reconstruct_mean(model, x);
    for (std::size_t i = 0; i < n; ++i) {
      const std::span<const Real> a = x.data().subspan(i * numel, numel);
      const std::span<const Real> b = recon.data().subspan(i * numel, numel);
      const SurfaceCounts ca = count_surfaces(a, res, window), cb = count_surfaces(b, res, window);
      frame_hits += ca.dominant() == cb.dominant();
      track_frames += ca.dominant() == Surface::Track;
      for (std::size_t p = 0; p < plane; ++p) {
        const Surface sa = classify_pixel(a[p], a[plane + p], a[2 * plane + p]);
        if (sa == Surface::Other) continue;
        ++pixels;
        grass += sa == Surface::Grass;
        pixel_hits += sa == classify_pixel(b[p], b[plane + p], b[2 * plane + p]);
      }
    }
  }
  const auto total = static_cast<double>(out.frames);
  out.frame_agreement = static_cast<double>(frame_hits) / total;
  out.track_dominant = static_cast<double>(track_frames) / total;
  out.pixel_agreement = pixels ? static_cast<double>(pixel_hits) / static_cast<double>(pixels) : 1.0;
  out.grass_share = pixels ? static_cast<double>(grass) / static_cast<double>(pixels) : 0.0;
  return out;
}

}  // namespace plls::inline PLLS_ABI::analysis
