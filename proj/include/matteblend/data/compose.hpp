#pragma once

// Synthetic training images: foregrounds with exact opacity composited over a
// background pool. Background choice is a pure function of (seed, sample
// index) so parallel workers and replays agree.

#include "matteblend/core/image_ops.hpp"
#include "matteblend/core/rng.hpp"
#include "matteblend/data/manifest.hpp"
#include "matteblend/labels.hpp"

#include <utility>
#include <vector>

namespace matteblend {

/// Scale the background so the shorter side covers the target, then take the
/// centered crop. Never distorts aspect ratio.
template <typename T>
RgbImage<T> fit_background(const RgbImage<T>& bg, int h, int w) {
  if (bg.height() == h && bg.width() == w) return bg;
  const double scale = std::max(static_cast<double>(h) / bg.height(),
                                static_cast<double>(w) / bg.width());
  const int nh = std::max(h, static_cast<int>(std::lround(bg.height() * scale)));
  const int nw = std::max(w, static_cast<int>(std::lround(bg.width() * scale)));
  RgbImage<T> scaled = resize_bilinear(bg, nh, nw);
  return crop(scaled, (nh - h) / 2, (nw - w) / 2, h, w);
}

/// Index of the background paired with sample `index` under `seed`.
inline std::size_t pick_background(std::uint64_t seed, std::uint64_t index, std::size_t pool_size) {
  if (pool_size == 0) throw std::invalid_argument("background pool is empty");
  Rng rng(mix_seed(seed, index));
  return static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool_size) - 1));
}

/// Composite one sample against its seeded background choice.
inline std::pair<RgbImage<float>, AlphaMatte<float>> compose_matte_sample(
    const MatteSample& s, const std::vector<RgbImage<float>>& backgrounds, std::uint64_t seed,
    std::uint64_t index) {
  const RgbImage<float>& bg = backgrounds[pick_background(seed, index, backgrounds.size())];
  RgbImage<float> fitted = fit_background(bg, s.fg.height(), s.fg.width());
  return {composite(s.fg, fitted, s.matte), s.matte};
}

inline std::vector<std::pair<RgbImage<float>, AlphaMatte<float>>> compose_matte_batch(
    const std::vector<MatteSample>& samples, const std::vector<RgbImage<float>>& backgrounds,
    std::uint64_t seed) {
  if (backgrounds.empty()) throw std::invalid_argument("background pool is empty");
  std::vector<std::pair<RgbImage<float>, AlphaMatte<float>>> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.push_back(compose_matte_sample(samples[i], backgrounds, seed, i));
  return out;
}

}  // namespace matteblend
