#pragma once

// Label algebra: alpha compositing, boundary-band extraction and matte label
// blending. Pure functions over pixel grids; the per-pixel kernels are shared
// with the tensor-batch paths used by the trainer.

#include "matteblend/core/grid.hpp"
#include "matteblend/core/tensor.hpp"

namespace matteblend {

/// Pixels with ground-truth opacity strictly inside (0.05, 0.95) form the
/// boundary region, both for the training label rule and for metrics.
inline constexpr double kBoundaryLow = 0.05;
inline constexpr double kBoundaryHigh = 0.95;

/// Continuous boundary-head outputs >= 0.5 binarize to 1.
inline constexpr double kBoundaryBinarizeThreshold = 0.5;

// -- per-pixel kernels -------------------------------------------------------

template <typename T>
constexpr T composite_pixel(T fg, T bg, T alpha) {
  return alpha * fg + (T(1) - alpha) * bg;
}

template <typename T>
constexpr std::uint8_t boundary_pixel(T matte) {
  return (matte > T(kBoundaryLow) && matte < T(kBoundaryHigh)) ? 1 : 0;
}

/// Blended matte: alpha'*M' + (1-alpha')*S. Accepts soft alpha' in [0,1];
/// the pipeline feeds binarized masks.
template <typename T>
constexpr T blend_pixel(T pseudo_matte, T pseudo_boundary, T seg) {
  return pseudo_boundary * pseudo_matte + (T(1) - pseudo_boundary) * seg;
}

template <typename T>
constexpr std::uint8_t binarize_pixel(T raw) {
  return raw >= T(kBoundaryBinarizeThreshold) ? 1 : 0;
}

// -- grid operations ---------------------------------------------------------

template <typename T>
RgbImage<T> composite(const RgbImage<T>& fg, const RgbImage<T>& bg, const AlphaMatte<T>& matte) {
  require_same_dims(fg.height(), fg.width(), bg.height(), bg.width(), "composite");
  require_same_dims(fg.height(), fg.width(), matte.height(), matte.width(), "composite");
  RgbImage<T> out(fg.height(), fg.width());
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < fg.height(); ++y)
      for (int x = 0; x < fg.width(); ++x)
        out.at(c, y, x) = composite_pixel(fg.at(c, y, x), bg.at(c, y, x), matte.at(y, x));
  return out;
}

template <typename T>
BoundaryMask extract_boundary(const AlphaMatte<T>& matte) {
  PixelGrid<std::uint8_t> out(matte.height(), matte.width());
  for (int y = 0; y < matte.height(); ++y)
    for (int x = 0; x < matte.width(); ++x) out.at(y, x) = boundary_pixel(matte.at(y, x));
  return BoundaryMask(std::move(out));
}

template <typename T>
AlphaMatte<T> blend_matte(const AlphaMatte<T>& pseudo_matte, const BoundaryMask& pseudo_boundary,
                          const SegMask& seg) {
  require_same_dims(pseudo_matte.height(), pseudo_matte.width(), pseudo_boundary.height(),
                    pseudo_boundary.width(), "blend_matte");
  require_same_dims(pseudo_matte.height(), pseudo_matte.width(), seg.height(), seg.width(),
                    "blend_matte");
  PixelGrid<T> out(pseudo_matte.height(), pseudo_matte.width());
  for (int y = 0; y < pseudo_matte.height(); ++y)
    for (int x = 0; x < pseudo_matte.width(); ++x)
      out.at(y, x) = blend_pixel(pseudo_matte.at(y, x), T(pseudo_boundary.at(y, x)),
                                 T(seg.at(y, x)));
  return AlphaMatte<T>(std::move(out));
}

/// General form of the blend with soft alpha' in [0,1] (pointwise convex
/// combination); kept for the soft-blending experiment.
template <typename T>
AlphaMatte<T> blend_matte_soft(const AlphaMatte<T>& pseudo_matte, const PixelGrid<T>& soft_boundary,
                               const SegMask& seg) {
  require_same_dims(pseudo_matte.height(), pseudo_matte.width(), soft_boundary.height(),
                    soft_boundary.width(), "blend_matte_soft");
  require_same_dims(pseudo_matte.height(), pseudo_matte.width(), seg.height(), seg.width(),
                    "blend_matte_soft");
  PixelGrid<T> out(pseudo_matte.height(), pseudo_matte.width());
  for (int y = 0; y < pseudo_matte.height(); ++y)
    for (int x = 0; x < pseudo_matte.width(); ++x) {
      const T a = soft_boundary.at(y, x);
      if (!(a >= T(0) && a <= T(1)))
        throw std::invalid_argument("blend_matte_soft: boundary weight outside [0,1]");
      out.at(y, x) = blend_pixel(pseudo_matte.at(y, x), a, T(seg.at(y, x)));
    }
  return AlphaMatte<T>(std::move(out));
}

template <typename T>
BoundaryMask binarize_boundary(const PixelGrid<T>& raw) {
  PixelGrid<std::uint8_t> out(raw.height(), raw.width());
  for (int y = 0; y < raw.height(); ++y)
    for (int x = 0; x < raw.width(); ++x) {
      const T v = raw.at(y, x);
      if (!(v >= T(0) && v <= T(1)))
        throw std::invalid_argument("binarize_boundary: value outside [0,1]");
      out.at(y, x) = binarize_pixel(v);
    }
  return BoundaryMask(std::move(out));
}

// -- tensor-batch variants (trainer hot path, [N,1,H,W]) ---------------------

template <typename T>
Tensor<T> extract_boundary_batch(const Tensor<T>& matte) {
  Tensor<T> out = Tensor<T>::zeros_like(matte);
  const T* m = matte.data();
  T* o = out.data();
  for (std::size_t i = 0; i < matte.size(); ++i) o[i] = T(boundary_pixel(m[i]));
  return out;
}

template <typename T>
Tensor<T> binarize_boundary_batch(const Tensor<T>& raw) {
  Tensor<T> out = Tensor<T>::zeros_like(raw);
  const T* r = raw.data();
  T* o = out.data();
  for (std::size_t i = 0; i < raw.size(); ++i) o[i] = T(binarize_pixel(r[i]));
  return out;
}

template <typename T>
Tensor<T> blend_matte_batch(const Tensor<T>& pseudo_matte, const Tensor<T>& pseudo_boundary,
                            const Tensor<T>& seg) {
  if (!pseudo_matte.same_shape(pseudo_boundary) || !pseudo_matte.same_shape(seg))
    throw std::invalid_argument("blend_matte_batch: dimension mismatch");
  Tensor<T> out = Tensor<T>::zeros_like(pseudo_matte);
  const T* m = pseudo_matte.data();
  const T* a = pseudo_boundary.data();
  const T* s = seg.data();
  T* o = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] = blend_pixel(m[i], a[i], s[i]);
  return out;
}

}  // namespace matteblend
