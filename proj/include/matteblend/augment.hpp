#pragma once

// Weak/strong augmentation. Both views share one geometric transform so any
// label valid for the weak view is pixel-aligned with the strong view; the
// strong view adds photometric jitter on top.
//
// Geometry order: bilinear rescale, reflection-pad up to the crop side if the
// scaled image is smaller, square crop, optional horizontal flip. Mattes and
// images interpolate bilinearly (mattes re-clamped to [0,1]); binary masks use
// nearest neighbor and stay binary.

#include "matteblend/core/grid.hpp"
#include "matteblend/core/image_ops.hpp"
#include "matteblend/core/rng.hpp"

#include <algorithm>
#include <cmath>

namespace matteblend {

struct AugmentConfig {
  double scale_min = 0.75;
  double scale_max = 1.25;
  int crop_min = 512;
  int crop_max = 768;
  double hflip_prob = 0.5;
  double brightness = 0.4;  // additive, sampled from [-b, b]
  double contrast = 0.4;    // multiplier 1+c around the mean luminance
  double saturation = 0.4;  // multiplier 1+s toward/away from luminance
  double hue = 0.1;         // fraction of a full chroma rotation

  bool operator==(const AugmentConfig&) const = default;
};

struct GeoTransform {
  double scale = 1.0;
  int crop_side = 0;
  int origin_y = 0;
  int origin_x = 0;
  bool hflip = false;
};

struct PhotoJitter {
  double brightness = 0.0;
  double contrast = 0.0;
  double saturation = 0.0;
  double hue = 0.0;
};

namespace detail {
inline int scaled_dim(int dim, double scale) {
  return std::max(1, static_cast<int>(std::lround(dim * scale)));
}
}  // namespace detail

/// Draw a transform. Draw order is fixed (scale, side, origin y, origin x,
/// flip) so a replay from the same rng state reproduces it field for field.
inline GeoTransform sample_geo(Rng& rng, int height, int width, const AugmentConfig& cfg = {}) {
  if (cfg.crop_min <= 0 || cfg.crop_max < cfg.crop_min)
    throw std::invalid_argument("sample_geo: bad crop range");
  if (!(cfg.scale_min > 0) || cfg.scale_max < cfg.scale_min)
    throw std::invalid_argument("sample_geo: bad scale range");
  GeoTransform t;
  t.scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  t.crop_side = static_cast<int>(rng.uniform_int(cfg.crop_min, cfg.crop_max));
  const int sh = std::max(detail::scaled_dim(height, t.scale), t.crop_side);
  const int sw = std::max(detail::scaled_dim(width, t.scale), t.crop_side);
  t.origin_y = static_cast<int>(rng.uniform_int(0, sh - t.crop_side));
  t.origin_x = static_cast<int>(rng.uniform_int(0, sw - t.crop_side));
  t.hflip = rng.bernoulli(cfg.hflip_prob);
  return t;
}

namespace detail {
template <typename T>
PixelGrid<T> apply_geo_grid(const GeoTransform& t, const PixelGrid<T>& src, bool bilinear) {
  const int sh = scaled_dim(src.height(), t.scale);
  const int sw = scaled_dim(src.width(), t.scale);
  PixelGrid<T> scaled = bilinear ? resize_bilinear(src, sh, sw) : resize_nearest(src, sh, sw);
  const int pad_h = std::max(0, t.crop_side - sh);
  const int pad_w = std::max(0, t.crop_side - sw);
  if (pad_h || pad_w)
    scaled = pad_reflect(scaled, pad_h / 2, pad_h - pad_h / 2, pad_w / 2, pad_w - pad_w / 2);
  PixelGrid<T> out = crop(scaled, t.origin_y, t.origin_x, t.crop_side, t.crop_side);
  return t.hflip ? mirror_horizontal(out) : std::move(out);
}
}  // namespace detail

template <typename T>
RgbImage<T> apply_geo(const GeoTransform& t, const RgbImage<T>& img) {
  RgbImage<T> out(t.crop_side, t.crop_side);
  for (int c = 0; c < 3; ++c) out.plane(c) = detail::apply_geo_grid(t, img.plane(c), true);
  return out;
}

template <typename T>
AlphaMatte<T> apply_geo(const GeoTransform& t, const AlphaMatte<T>& m) {
  PixelGrid<T> g = detail::apply_geo_grid(t, m.grid(), true);
  for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] = std::clamp(g.data()[i], T(0), T(1));
  return AlphaMatte<T>(std::move(g));
}

inline SegMask apply_geo(const GeoTransform& t, const SegMask& m) {
  return SegMask(detail::apply_geo_grid(t, m.grid(), false));
}

inline BoundaryMask apply_geo(const GeoTransform& t, const BoundaryMask& m) {
  return BoundaryMask(detail::apply_geo_grid(t, m.grid(), false));
}

/// Jitter magnitudes drawn uniformly from the configured symmetric ranges.
inline PhotoJitter sample_photo(Rng& rng, const AugmentConfig& cfg = {}) {
  PhotoJitter j;
  j.brightness = rng.uniform(-cfg.brightness, cfg.brightness);
  j.contrast = rng.uniform(-cfg.contrast, cfg.contrast);
  j.saturation = rng.uniform(-cfg.saturation, cfg.saturation);
  j.hue = rng.uniform(-cfg.hue, cfg.hue);
  return j;
}

/// Photometric-only change, applied as brightness, contrast, saturation, hue
/// in that order with a single final clamp to [0,1].
///   brightness: v + d
///   contrast:   mean_lum + (v - mean_lum) * (1 + c), mean over the image
///   saturation: lum + (v - lum) * (1 + s), per pixel
///   hue:        chroma-plane rotation by hue * 2*pi (luminance preserved)
template <typename T>
RgbImage<T> apply_photo(const PhotoJitter& j, const RgbImage<T>& img) {
  const int h = img.height(), w = img.width();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> r(n), g(n), b(n);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = img.plane(0).data()[i] + j.brightness;
    g[i] = img.plane(1).data()[i] + j.brightness;
    b[i] = img.plane(2).data()[i] + j.brightness;
  }

  auto lum = [](double rr, double gg, double bb) { return 0.299 * rr + 0.587 * gg + 0.114 * bb; };

  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += lum(r[i], g[i], b[i]);
  mean /= static_cast<double>(n);
  const double cf = 1.0 + j.contrast;
  for (std::size_t i = 0; i < n; ++i) {
    r[i] = mean + (r[i] - mean) * cf;
    g[i] = mean + (g[i] - mean) * cf;
    b[i] = mean + (b[i] - mean) * cf;
  }

  const double sf = 1.0 + j.saturation;
  for (std::size_t i = 0; i < n; ++i) {
    const double l = lum(r[i], g[i], b[i]);
    r[i] = l + (r[i] - l) * sf;
    g[i] = l + (g[i] - l) * sf;
    b[i] = l + (b[i] - l) * sf;
  }

  if (j.hue != 0.0) {
    // Rotate the (I, Q) chroma plane of YIQ space; Y is untouched.
    const double a = j.hue * 2.0 * 3.14159265358979323846;
    const double ca = std::cos(a), sa = std::sin(a);
    for (std::size_t i = 0; i < n; ++i) {
      const double Y = lum(r[i], g[i], b[i]);
      const double I = 0.595716 * r[i] - 0.274453 * g[i] - 0.321263 * b[i];
      const double Q = 0.211456 * r[i] - 0.522591 * g[i] + 0.311135 * b[i];
      const double I2 = ca * I - sa * Q;
      const double Q2 = sa * I + ca * Q;
      r[i] = Y + 0.9563 * I2 + 0.6210 * Q2;
      g[i] = Y - 0.2721 * I2 - 0.6474 * Q2;
      b[i] = Y - 1.1070 * I2 + 1.7046 * Q2;
    }
  }

  RgbImage<T> out(h, w);
  for (std::size_t i = 0; i < n; ++i) {
    out.plane(0).data()[i] = static_cast<T>(std::clamp(r[i], 0.0, 1.0));
    out.plane(1).data()[i] = static_cast<T>(std::clamp(g[i], 0.0, 1.0));
    out.plane(2).data()[i] = static_cast<T>(std::clamp(b[i], 0.0, 1.0));
  }
  return out;
}

}  // namespace matteblend
