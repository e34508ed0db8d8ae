#pragma once

// Bridges between the typed single-image world (grids, mattes, masks) and the
// NCHW tensors the network consumes. Batch stackers require uniform sizes;
// augmentation is responsible for producing them.

#include "matteblend/core/grid.hpp"
#include "matteblend/core/tensor.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace matteblend {

template <typename T>
void copy_image_into(Tensor<T>& dst, int n, const RgbImage<T>& img) {
  for (int c = 0; c < 3; ++c)
    std::copy(img.plane(c).data(), img.plane(c).data() + img.plane(c).size(), dst.plane(n, c));
}

template <typename T>
Tensor<T> batch_from_images(const std::vector<RgbImage<T>>& images) {
  if (images.empty()) throw std::invalid_argument("batch_from_images: empty batch");
  const int h = images[0].height(), w = images[0].width();
  Tensor<T> out(static_cast<int>(images.size()), 3, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height() != h || images[i].width() != w)
      throw std::invalid_argument("batch_from_images: mixed sizes in batch");
    copy_image_into(out, static_cast<int>(i), images[i]);
  }
  return out;
}

template <typename T>
Tensor<T> batch_from_mattes(const std::vector<AlphaMatte<T>>& mattes) {
  if (mattes.empty()) throw std::invalid_argument("batch_from_mattes: empty batch");
  const int h = mattes[0].height(), w = mattes[0].width();
  Tensor<T> out(static_cast<int>(mattes.size()), 1, h, w);
  for (std::size_t i = 0; i < mattes.size(); ++i) {
    if (mattes[i].height() != h || mattes[i].width() != w)
      throw std::invalid_argument("batch_from_mattes: mixed sizes in batch");
    std::copy(mattes[i].grid().data(), mattes[i].grid().data() + mattes[i].grid().size(),
              out.plane(static_cast<int>(i), 0));
  }
  return out;
}

/// Binary masks widen to the tensor scalar type ({0,1} values preserved).
template <typename T, typename Mask>
Tensor<T> batch_from_masks(const std::vector<Mask>& masks) {
  if (masks.empty()) throw std::invalid_argument("batch_from_masks: empty batch");
  const int h = masks[0].height(), w = masks[0].width();
  Tensor<T> out(static_cast<int>(masks.size()), 1, h, w);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].height() != h || masks[i].width() != w)
      throw std::invalid_argument("batch_from_masks: mixed sizes in batch");
    T* dst = out.plane(static_cast<int>(i), 0);
    const auto& g = masks[i].grid();
    for (std::size_t j = 0; j < g.size(); ++j) dst[j] = static_cast<T>(g.data()[j]);
  }
  return out;
}

/// Extract one matte plane from a [N,1,H,W] head output, clamping the tiny
/// float excursions past the sigmoid range bounds.
template <typename T>
AlphaMatte<T> matte_from_tensor(const Tensor<T>& t, int n) {
  if (t.c() != 1) throw std::invalid_argument("matte_from_tensor: expected single channel");
  PixelGrid<T> g(t.h(), t.w());
  const T* src = t.plane(n, 0);
  for (std::size_t i = 0; i < g.size(); ++i)
    g.data()[i] = std::min(T(1), std::max(T(0), src[i]));
  return AlphaMatte<T>(std::move(g));
}

template <typename T>
RgbImage<T> image_from_tensor(const Tensor<T>& t, int n) {
  if (t.c() != 3) throw std::invalid_argument("image_from_tensor: expected three channels");
  RgbImage<T> img(t.h(), t.w());
  for (int c = 0; c < 3; ++c) {
    T* dst = img.plane(c).data();
    const T* src = t.plane(n, c);
    for (std::size_t i = 0; i < img.plane(c).size(); ++i)
      dst[i] = std::min(T(1), std::max(T(0), src[i]));
  }
  return img;
}

}  // namespace matteblend
