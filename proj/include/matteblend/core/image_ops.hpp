#pragma once

// Grid-level geometry: bilinear/nearest resize, reflection padding, cropping
// and horizontal mirroring. Shared by augmentation, background fitting and
// the evaluation resize protocol.

#include "matteblend/core/grid.hpp"

#include <algorithm>
#include <cmath>

namespace matteblend {

/// Fold an out-of-range index back into [0, n) by reflection about the edges
/// without repeating the edge sample. Handles offsets of any magnitude.
inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

template <typename T>
T sample_bilinear_clamped(const PixelGrid<T>& g, double fy, double fx) {
  fy = std::clamp(fy, 0.0, static_cast<double>(g.height() - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(g.width() - 1));
  const int y0 = static_cast<int>(fy);
  const int x0 = static_cast<int>(fx);
  const int y1 = std::min(y0 + 1, g.height() - 1);
  const int x1 = std::min(x0 + 1, g.width() - 1);
  const double dy = fy - y0, dx = fx - x0;
  const double v = (1 - dy) * ((1 - dx) * g.at(y0, x0) + dx * g.at(y0, x1)) +
                   dy * ((1 - dx) * g.at(y1, x0) + dx * g.at(y1, x1));
  return static_cast<T>(v);
}

/// Pixel-center mapping: src = (dst + 0.5) * (src_dim / dst_dim) - 0.5.
template <typename T>
PixelGrid<T> resize_bilinear(const PixelGrid<T>& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize: output dims must be positive");
  if (src.height() == out_h && src.width() == out_w) return src;
  PixelGrid<T> out(out_h, out_w);
  const double sy = static_cast<double>(src.height()) / out_h;
  const double sx = static_cast<double>(src.width()) / out_w;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      out.at(y, x) = sample_bilinear_clamped(src, (y + 0.5) * sy - 0.5, (x + 0.5) * sx - 0.5);
  return out;
}

template <typename T>
PixelGrid<T> resize_nearest(const PixelGrid<T>& src, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize: output dims must be positive");
  if (src.height() == out_h && src.width() == out_w) return src;
  PixelGrid<T> out(out_h, out_w);
  const double sy = static_cast<double>(src.height()) / out_h;
  const double sx = static_cast<double>(src.width()) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const int yy = std::min(static_cast<int>((y + 0.5) * sy), src.height() - 1);
    for (int x = 0; x < out_w; ++x) {
      const int xx = std::min(static_cast<int>((x + 0.5) * sx), src.width() - 1);
      out.at(y, x) = src.at(yy, xx);
    }
  }
  return out;
}

template <typename T>
PixelGrid<T> pad_reflect(const PixelGrid<T>& src, int top, int bottom, int left, int right) {
  if (top < 0 || bottom < 0 || left < 0 || right < 0)
    throw std::invalid_argument("pad_reflect: negative padding");
  if (top == 0 && bottom == 0 && left == 0 && right == 0) return src;
  PixelGrid<T> out(src.height() + top + bottom, src.width() + left + right);
  for (int y = 0; y < out.height(); ++y) {
    const int sy = reflect_index(y - top, src.height());
    for (int x = 0; x < out.width(); ++x) out.at(y, x) = src.at(sy, reflect_index(x - left, src.width()));
  }
  return out;
}

template <typename T>
PixelGrid<T> crop(const PixelGrid<T>& src, int y0, int x0, int h, int w) {
  if (h <= 0 || w <= 0 || y0 < 0 || x0 < 0 || y0 + h > src.height() || x0 + w > src.width())
    throw std::invalid_argument("crop: window outside image");
  PixelGrid<T> out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(y, x) = src.at(y0 + y, x0 + x);
  return out;
}

template <typename T>
PixelGrid<T> mirror_horizontal(const PixelGrid<T>& src) {
  PixelGrid<T> out(src.height(), src.width());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) out.at(y, x) = src.at(y, src.width() - 1 - x);
  return out;
}

// RGB wrappers apply the same grid op per plane.

template <typename T>
RgbImage<T> resize_bilinear(const RgbImage<T>& src, int out_h, int out_w) {
  RgbImage<T> out(out_h, out_w);
  for (int c = 0; c < 3; ++c) out.plane(c) = resize_bilinear(src.plane(c), out_h, out_w);
  return out;
}

template <typename T>
RgbImage<T> pad_reflect(const RgbImage<T>& src, int top, int bottom, int left, int right) {
  if (top == 0 && bottom == 0 && left == 0 && right == 0) return src;
  RgbImage<T> out(src.height() + top + bottom, src.width() + left + right);
  for (int c = 0; c < 3; ++c) out.plane(c) = pad_reflect(src.plane(c), top, bottom, left, right);
  return out;
}

template <typename T>
RgbImage<T> crop(const RgbImage<T>& src, int y0, int x0, int h, int w) {
  RgbImage<T> out(h, w);
  for (int c = 0; c < 3; ++c) out.plane(c) = crop(src.plane(c), y0, x0, h, w);
  return out;
}

template <typename T>
RgbImage<T> mirror_horizontal(const RgbImage<T>& src) {
  RgbImage<T> out(src.height(), src.width());
  for (int c = 0; c < 3; ++c) out.plane(c) = mirror_horizontal(src.plane(c));
  return out;
}

}  // namespace matteblend
