#pragma once

// Procedural two-domain toy dataset.
//
// Foregrounds are anti-aliased radial blobs with thin tapering filament
// strands, so their alpha mattes are honestly soft: edge and strand pixels
// densely populate (0,1). The same foreground generator feeds two looks:
//   domain A ("matte look"):   flat colors and smooth linear gradients
//   domain B ("natural look"): high-frequency procedural textures
// Training data: matte_fg/ holds foreground+alpha pairs (background supplied
// at composition time from the backgrounds/ pool, all domain A); seg/ holds
// domain-B composites with labels coarsened to binary masks by thresholding
// alpha at 0.5 and applying a random dilation or erosion of radius 1 to 3.
// Held-out eval_matte/ and eval_natural/ keep exact alpha for both domains.
//
// The two background distributions are separated by mean local variance;
// generation fails loudly if the measured gap drops below the configured
// margin, since the cross-domain experiments are meaningless without it.

#include "matteblend/core/image_ops.hpp"
#include "matteblend/core/rng.hpp"
#include "matteblend/data/image_io.hpp"
#include "matteblend/data/manifest.hpp"
#include "matteblend/labels.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

struct ToyConfig {
  int n_matte = 64;        // foreground+alpha training samples
  int n_seg = 256;         // domain-B training composites with coarse masks
  int n_eval = 16;         // held-out samples per eval domain
  int n_backgrounds = 32;  // domain-A pool for composition-time pairing
  int image_size = 128;
  std::uint64_t seed = 1;
  bool overwrite = false;
  double min_variance_margin = 0.005;  // required domain gap in mean local variance
};

struct ToyWorldPaths {
  std::string matte_fg;
  std::string backgrounds;
  std::string seg;
  std::string eval_matte;
  std::string eval_natural;
};

/// Mean over interior pixels of the 3x3 luminance variance: the statistic
/// separating the two background domains.
template <typename T>
double mean_local_variance(const RgbImage<T>& img) {
  const int h = img.height(), w = img.width();
  if (h < 3 || w < 3) throw std::invalid_argument("mean_local_variance: image too small");
  PixelGrid<double> lum(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      lum.at(y, x) = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) + 0.114 * img.at(2, y, x);
  double acc = 0.0;
  for (int y = 1; y + 1 < h; ++y)
    for (int x = 1; x + 1 < w; ++x) {
      double s = 0.0, sq = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const double v = lum.at(y + dy, x + dx);
          s += v;
          sq += v * v;
        }
      const double m = s / 9.0;
      acc += sq / 9.0 - m * m;
    }
  return acc / (static_cast<double>(h - 2) * (w - 2));
}

namespace toy_detail {

inline std::string zero_pad(int v, int digits = 4) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%0*d", digits, v);
  return buf;
}

struct Foreground {
  RgbImage<float> color;
  AlphaMatte<float> alpha;
};

inline Foreground render_foreground_once(Rng rng, int size) {
  PixelGrid<float> alpha(size, size, 0.f);

  // Radial blob: base radius modulated by a few random harmonics, edge
  // softened over one to a few pixels.
  const double cx = size * rng.uniform(0.42, 0.58);
  const double cy = size * rng.uniform(0.42, 0.58);
  const double r0 = size * rng.uniform(0.20, 0.30);
  constexpr int kHarmonics = 5;
  double amp[kHarmonics], phase[kHarmonics];
  for (int k = 0; k < kHarmonics; ++k) {
    amp[k] = std::clamp(rng.normal() * 0.06, -0.11, 0.11) * r0;
    phase[k] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  }
  const double edge_soft = rng.uniform(1.4, 2.6);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double d = std::hypot(dx, dy);
      const double th = std::atan2(dy, dx);
      double r = r0;
      for (int k = 0; k < kHarmonics; ++k) r += amp[k] * std::cos((k + 2) * th + phase[k]);
      const double a = std::clamp((r - d) / edge_soft + 0.5, 0.0, 1.0);
      alpha.at(y, x) = static_cast<float>(a);
    }

  // Filament strands: quadratic Bezier curves rooted on the blob edge with
  // tapering width and partial opacity, stamped as max over soft discs.
  const int n_strands = static_cast<int>(rng.uniform_int(6, 14));
  for (int s = 0; s < n_strands; ++s) {
    const double th = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    double r_edge = r0;
    for (int k = 0; k < kHarmonics; ++k) r_edge += amp[k] * std::cos((k + 2) * th + phase[k]);
    const double p0x = cx + (r_edge - 1.0) * std::cos(th);
    const double p0y = cy + (r_edge - 1.0) * std::sin(th);
    const double len = size * rng.uniform(0.10, 0.30);
    const double dir1 = th + rng.uniform(-0.6, 0.6);
    const double dir2 = th + rng.uniform(-0.9, 0.9);
    const double p1x = p0x + 0.5 * len * std::cos(dir1);
    const double p1y = p0y + 0.5 * len * std::sin(dir1);
    const double p2x = p0x + len * std::cos(dir2);
    const double p2y = p0y + len * std::sin(dir2);
    const double w0 = rng.uniform(0.8, 1.6);
    const double w1 = rng.uniform(0.15, 0.45);
    const double opacity = rng.uniform(0.65, 1.0);

    const int steps = std::max(8, static_cast<int>(len * 2.0));
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      const double u = 1.0 - t;
      const double bx = u * u * p0x + 2 * u * t * p1x + t * t * p2x;
      const double by = u * u * p0y + 2 * u * t * p1y + t * t * p2y;
      const double wt = w0 * u + w1 * t;
      const int rad = static_cast<int>(std::ceil(wt + 1.0));
      for (int yy = std::max(0, static_cast<int>(by) - rad);
           yy <= std::min(size - 1, static_cast<int>(by) + rad); ++yy)
        for (int xx = std::max(0, static_cast<int>(bx) - rad);
             xx <= std::min(size - 1, static_cast<int>(bx) + rad); ++xx) {
          const double dist = std::hypot(xx - bx, yy - by);
          const double a = opacity * std::clamp(wt - dist + 0.5, 0.0, 1.0);
          alpha.at(yy, xx) = std::max(alpha.at(yy, xx), static_cast<float>(a));
        }
    }
  }

  // Foreground color: smooth two-color ramp along a random direction.
  RgbImage<float> color(size, size);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.15, 0.85);
    c1[c] = rng.uniform(0.15, 0.85);
  }
  const double ga = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double gx = std::cos(ga), gy = std::sin(ga);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double t = std::clamp(((x - cx) * gx + (y - cy) * gy) / (1.5 * r0) * 0.5 + 0.5, 0.0, 1.0);
      for (int c = 0; c < 3; ++c)
        color.at(c, y, x) = static_cast<float>(c0[c] * (1.0 - t) + c1[c] * t);
    }

  return {std::move(color), AlphaMatte<float>(std::move(alpha))};
}

/// Quantized alpha must keep at least one clearly-soft pixel; retry with a
/// derived stream in the (astronomically unlikely) degenerate case.
inline Foreground render_foreground(const Rng& base, int size) {
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    Foreground fg = render_foreground_once(base.stream(attempt), size);
    for (std::size_t i = 0; i < fg.alpha.grid().size(); ++i) {
      const int q = static_cast<int>(std::lround(fg.alpha.grid().data()[i] * 255.f));
      if (q > 26 && q < 230) return fg;  // stays inside the band after 8-bit quantization
    }
  }
  throw std::runtime_error("foreground generator failed to produce a soft edge");
}

inline RgbImage<float> render_background_a(Rng rng, int size) {
  RgbImage<float> img(size, size);
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.0, 1.0);
    c1[c] = rng.uniform(0.0, 1.0);
  }
  if (rng.bernoulli(0.4)) {
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) img.at(c, y, x) = static_cast<float>(c0[c]);
    return img;
  }
  const double ga = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
  const double gx = std::cos(ga), gy = std::sin(ga);
  const double span = size * 0.70710678;
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double t =
          std::clamp(((x - size / 2.0) * gx + (y - size / 2.0) * gy) / span * 0.5 + 0.5, 0.0, 1.0);
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) = static_cast<float>(c0[c] * (1.0 - t) + c1[c] * t);
    }
  return img;
}

inline RgbImage<float> render_background_b(Rng rng, int size) {
  RgbImage<float> img(size, size);
  const int kind = static_cast<int>(rng.uniform_int(0, 2));
  double base[3], alt[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.1, 0.9);
    alt[c] = rng.uniform(0.1, 0.9);
  }
  const double f1 = rng.uniform(0.6, 1.4);
  const double f2 = rng.uniform(0.6, 1.4);
  const double ph1 = rng.uniform(0.0, 6.28318530717958647692);
  const double ph2 = rng.uniform(0.0, 6.28318530717958647692);
  const int cell = static_cast<int>(rng.uniform_int(2, 5));
  const double noise_amp = rng.uniform(0.12, 0.2);
  Rng noise = rng.stream(1);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      double t;
      if (kind == 0) {
        t = 0.5 + 0.5 * std::sin(f1 * x + ph1) * std::sin(f2 * y + ph2);
      } else if (kind == 1) {
        t = ((x / cell) + (y / cell)) % 2 ? 1.0 : 0.0;
      } else {
        t = ((x + 2 * y) / cell) % 2 ? 1.0 : 0.0;
      }
      const double n = noise.uniform(-noise_amp, noise_amp);
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) =
            static_cast<float>(std::clamp(base[c] * (1.0 - t) + alt[c] * t + n, 0.0, 1.0));
    }
  return img;
}

inline PixelGrid<std::uint8_t> morphology(const PixelGrid<std::uint8_t>& src, int radius,
                                          bool dilate) {
  PixelGrid<std::uint8_t> out(src.height(), src.width());
  const int r2 = radius * radius;
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) {
      std::uint8_t v = dilate ? 0 : 1;
      for (int dy = -radius; dy <= radius && v == (dilate ? 0 : 1); ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          if (dy * dy + dx * dx > r2) continue;
          const int yy = y + dy, xx = x + dx;
          std::uint8_t s = 0;
          if (yy >= 0 && yy < src.height() && xx >= 0 && xx < src.width()) s = src.at(yy, xx);
          if (dilate && s) { v = 1; break; }
          if (!dilate && !s) { v = 0; break; }
        }
      out.at(y, x) = v;
    }
  return out;
}

/// Binarize alpha at 0.5, then randomly dilate or erode: the deliberately
/// sloppy "human annotator" mask.
inline SegMask coarsen_to_seg(const AlphaMatte<float>& alpha, Rng rng) {
  PixelGrid<std::uint8_t> bin(alpha.height(), alpha.width());
  for (int y = 0; y < alpha.height(); ++y)
    for (int x = 0; x < alpha.width(); ++x) bin.at(y, x) = alpha.at(y, x) >= 0.5f ? 1 : 0;
  const int radius = static_cast<int>(rng.uniform_int(1, 3));
  const bool dilate = rng.bernoulli(0.5);
  return SegMask(morphology(bin, radius, dilate));
}

inline void prepare_dir(const std::filesystem::path& p) {
  std::filesystem::create_directories(p / "images");
  std::filesystem::create_directories(p / "labels");
}

}  // namespace toy_detail

inline ToyWorldPaths generate_toy_world(const std::string& out_root, const ToyConfig& cfg) {
  namespace fs = std::filesystem;
  using namespace toy_detail;

  if (cfg.n_matte <= 0 || cfg.n_seg <= 0 || cfg.n_eval <= 0 || cfg.n_backgrounds <= 0)
    throw std::invalid_argument("toy world: all sample counts must be positive");
  if (cfg.image_size < 32) throw std::invalid_argument("toy world: image_size must be >= 32");

  const fs::path root(out_root);
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!cfg.overwrite)
      throw std::runtime_error("output directory '" + out_root +
                               "' is not empty (pass overwrite to replace it)");
    fs::remove_all(root);
  }
  ToyWorldPaths paths{(root / "matte_fg").string(), (root / "backgrounds").string(),
                      (root / "seg").string(), (root / "eval_matte").string(),
                      (root / "eval_natural").string()};
  prepare_dir(root / "matte_fg");
  fs::create_directories(root / "backgrounds");
  prepare_dir(root / "seg");
  prepare_dir(root / "eval_matte");
  prepare_dir(root / "eval_natural");

  const Rng master(cfg.seed);
  const int S = cfg.image_size;
  double var_a_sum = 0.0, var_b_sum = 0.0;
  int var_a_n = 0, var_b_n = 0;

  // Domain-A pool used for composition-time pairing during training.
  for (int i = 0; i < cfg.n_backgrounds; ++i) {
    RgbImage<float> bg = render_background_a(master.stream(mix_seed(1, i)), S);
    var_a_sum += mean_local_variance(bg);
    ++var_a_n;
    write_rgb_image((fs::path(paths.backgrounds) / ("b" + zero_pad(i) + ".png")).string(), bg);
  }

  // Foreground+alpha training pairs (the scarce precisely-labeled data).
  for (int i = 0; i < cfg.n_matte; ++i) {
    Foreground fg = render_foreground(master.stream(mix_seed(2, i)), S);
    const std::string id = "m" + zero_pad(i);
    write_rgb_image((fs::path(paths.matte_fg) / "images" / (id + ".png")).string(), fg.color);
    write_alpha_matte((fs::path(paths.matte_fg) / "labels" / (id + ".png")).string(), fg.alpha);
  }

  // Domain-B composites with coarse masks (the plentiful weakly-labeled data).
  for (int i = 0; i < cfg.n_seg; ++i) {
    const Rng r = master.stream(mix_seed(3, i));
    Foreground fg = render_foreground(r.stream(0), S);
    RgbImage<float> bg = render_background_b(r.stream(1), S);
    var_b_sum += mean_local_variance(bg);
    ++var_b_n;
    RgbImage<float> img = composite(fg.color, bg, fg.alpha);
    SegMask seg = coarsen_to_seg(fg.alpha, r.stream(2));
    const std::string id = "s" + zero_pad(i);
    write_rgb_image((fs::path(paths.seg) / "images" / (id + ".png")).string(), img);
    write_seg_mask((fs::path(paths.seg) / "labels" / (id + ".png")).string(), seg);
  }

  // Held-out eval sets, exact alpha in both domains.
  for (int i = 0; i < cfg.n_eval; ++i) {
    const Rng r = master.stream(mix_seed(4, i));
    Foreground fg = render_foreground(r.stream(0), S);
    RgbImage<float> bg_a = render_background_a(r.stream(1), S);
    var_a_sum += mean_local_variance(bg_a);
    ++var_a_n;
    const std::string id = "e" + zero_pad(i);
    write_rgb_image((fs::path(paths.eval_matte) / "images" / (id + ".png")).string(),
                    composite(fg.color, bg_a, fg.alpha));
    write_alpha_matte((fs::path(paths.eval_matte) / "labels" / (id + ".png")).string(), fg.alpha);
  }
  for (int i = 0; i < cfg.n_eval; ++i) {
    const Rng r = master.stream(mix_seed(5, i));
    Foreground fg = render_foreground(r.stream(0), S);
    RgbImage<float> bg_b = render_background_b(r.stream(1), S);
    var_b_sum += mean_local_variance(bg_b);
    ++var_b_n;
    const std::string id = "n" + zero_pad(i);
    write_rgb_image((fs::path(paths.eval_natural) / "images" / (id + ".png")).string(),
                    composite(fg.color, bg_b, fg.alpha));
    write_alpha_matte((fs::path(paths.eval_natural) / "labels" / (id + ".png")).string(), fg.alpha);
  }

  const double var_a = var_a_sum / var_a_n;
  const double var_b = var_b_sum / var_b_n;
  if (var_b - var_a < cfg.min_variance_margin)
    throw std::runtime_error(
        "toy world domain gap too small: mean local variance A=" + std::to_string(var_a) +
        " B=" + std::to_string(var_b) + " margin=" + std::to_string(cfg.min_variance_margin));

  nlohmann::json meta{{"n_matte", cfg.n_matte},
                      {"n_seg", cfg.n_seg},
                      {"n_eval", cfg.n_eval},
                      {"n_backgrounds", cfg.n_backgrounds},
                      {"image_size", cfg.image_size},
                      {"seed", cfg.seed},
                      {"mean_local_variance_a", var_a},
                      {"mean_local_variance_b", var_b}};
  std::ofstream meta_out((root / "toy_world.json").string());
  meta_out << meta.dump(2) << "\n";

  return paths;
}

}  // namespace matteblend
