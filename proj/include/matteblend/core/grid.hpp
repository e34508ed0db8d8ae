#pragma once

// Pixel-grid domain types used by the label algebra, datasets and metrics.
// All pixel math is normalized [0,1]; 8-bit file values are divided by 255
// on ingestion. RGB images are stored planar (channel-major) so conversion
// to NCHW tensors is a straight copy.

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

template <typename T>
class PixelGrid {
 public:
  PixelGrid() = default;
  PixelGrid(int height, int width, T fill = T(0))
      : h_(height), w_(width), v_(static_cast<std::size_t>(height) * width, fill) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("PixelGrid: dims must be positive");
  }

  int height() const { return h_; }
  int width() const { return w_; }
  std::size_t size() const { return v_.size(); }

  T& at(int y, int x) { return v_[static_cast<std::size_t>(y) * w_ + x]; }
  T at(int y, int x) const { return v_[static_cast<std::size_t>(y) * w_ + x]; }
  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }

  bool same_shape_as(int h, int w) const { return h_ == h && w_ == w; }

 private:
  int h_ = 0, w_ = 0;
  std::vector<T> v_;
};

// ---------------------------------------------------------------------------
// Typed maps with their range invariants checked at construction.
// ---------------------------------------------------------------------------

/// Per-pixel opacity in [0,1].
template <typename T>
class AlphaMatte {
 public:
  AlphaMatte() = default;
  explicit AlphaMatte(PixelGrid<T> values) : g_(std::move(values)) { validate(); }
  AlphaMatte(int height, int width, T fill = T(0)) : g_(height, width, fill) { validate_scalar(fill); }

  int height() const { return g_.height(); }
  int width() const { return g_.width(); }
  T at(int y, int x) const { return g_.at(y, x); }
  T& at(int y, int x) { return g_.at(y, x); }
  const PixelGrid<T>& grid() const { return g_; }
  PixelGrid<T>& grid() { return g_; }

 private:
  static void validate_scalar(T v) {
    if (!(v >= T(0) && v <= T(1))) throw std::invalid_argument("AlphaMatte: value outside [0,1]");
  }
  void validate() const {
    for (std::size_t i = 0; i < g_.size(); ++i) validate_scalar(g_.data()[i]);
  }
  PixelGrid<T> g_;
};

/// Binary mask base; elements are exactly 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0) : g_(height, width, fill) {
    if (fill > 1) throw std::invalid_argument("mask values must be 0 or 1");
  }
  explicit BinaryMask(PixelGrid<std::uint8_t> values) : g_(std::move(values)) {
    for (std::size_t i = 0; i < g_.size(); ++i)
      if (g_.data()[i] > 1) throw std::invalid_argument("mask values must be 0 or 1");
  }

  int height() const { return g_.height(); }
  int width() const { return g_.width(); }
  std::uint8_t at(int y, int x) const { return g_.at(y, x); }
  std::uint8_t& at(int y, int x) { return g_.at(y, x); }
  const PixelGrid<std::uint8_t>& grid() const { return g_; }

 private:
  PixelGrid<std::uint8_t> g_;
};

/// Coarse binary human-region mask (the weak label).
class SegMask : public BinaryMask {
  using BinaryMask::BinaryMask;
};

/// Binary mask of detail-requiring pixels derived from a matte.
class BoundaryMask : public BinaryMask {
  using BinaryMask::BinaryMask;
};

/// 3-channel image with intensities in [0,1], planar storage.
template <typename T>
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int height, int width, T fill = T(0)) : h_(height), w_(width) {
    if (height <= 0 || width <= 0) throw std::invalid_argument("RgbImage: dims must be positive");
    if (!(fill >= T(0) && fill <= T(1))) throw std::invalid_argument("RgbImage: value outside [0,1]");
    for (auto& p : planes_) p = PixelGrid<T>(height, width, fill);
  }

  int height() const { return h_; }
  int width() const { return w_; }
  T at(int c, int y, int x) const { return planes_[c].at(y, x); }
  T& at(int c, int y, int x) { return planes_[c].at(y, x); }
  const PixelGrid<T>& plane(int c) const { return planes_[c]; }
  PixelGrid<T>& plane(int c) { return planes_[c]; }

  void validate_range() const {
    for (const auto& p : planes_)
      for (std::size_t i = 0; i < p.size(); ++i)
        if (!(p.data()[i] >= T(0) && p.data()[i] <= T(1)))
          throw std::invalid_argument("RgbImage: value outside [0,1]");
  }

 private:
  int h_ = 0, w_ = 0;
  std::array<PixelGrid<T>, 3> planes_;
};

inline void require_same_dims(int h1, int w1, int h2, int w2, const std::string& what) {
  if (h1 != h2 || w1 != w2)
    throw std::invalid_argument(what + ": dimension mismatch (" + std::to_string(h1) + "x" +
                                std::to_string(w1) + " vs " + std::to_string(h2) + "x" +
                                std::to_string(w2) + ")");
}

}  // namespace matteblend
