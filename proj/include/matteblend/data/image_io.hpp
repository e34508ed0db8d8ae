#pragma once

// 8-bit PNG ingestion and export via libpng's simplified API. Readers
// normalize whatever the file holds (palette, 16-bit, alpha, interlacing)
// to gray or RGB at 8 bits, then to [0,1] floats. Writers quantize by
// round-to-nearest, so a write/read round trip is within 1/255.

#include "matteblend/core/grid.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

struct RawImage {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

inline RawImage read_png(const std::string& path, int want_channels) {
  if (want_channels != 1 && want_channels != 3)
    throw std::invalid_argument("read_png: want_channels must be 1 or 3");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str()))
    throw std::runtime_error("failed to open PNG '" + path + "': " + img.message);
  img.format = want_channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  RawImage out;
  out.height = static_cast<int>(img.height);
  out.width = static_cast<int>(img.width);
  out.channels = want_channels;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&img);
    throw std::runtime_error("failed to decode PNG '" + path + "': " + img.message);
  }
  return out;
}

inline void write_png(const std::string& path, int height, int width, int channels,
                      const std::uint8_t* pixels) {
  if (channels != 1 && channels != 3) throw std::invalid_argument("write_png: channels must be 1 or 3");
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, pixels, 0, nullptr))
    throw std::runtime_error("failed to write PNG '" + path + "': " + img.message);
}

namespace detail {
template <typename T>
std::uint8_t to_u8(T v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}
}  // namespace detail

template <typename T = float>
RgbImage<T> read_rgb_image(const std::string& path) {
  const RawImage raw = read_png(path, 3);
  RgbImage<T> out(raw.height, raw.width);
  const std::uint8_t* p = raw.pixels.data();
  for (int y = 0; y < raw.height; ++y)
    for (int x = 0; x < raw.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(c, y, x) = static_cast<T>(*p++ / 255.0);
  return out;
}

template <typename T = float>
PixelGrid<T> read_gray_grid(const std::string& path) {
  const RawImage raw = read_png(path, 1);
  PixelGrid<T> out(raw.height, raw.width);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = static_cast<T>(raw.pixels[i] / 255.0);
  return out;
}

template <typename T = float>
AlphaMatte<T> read_alpha_matte(const std::string& path) {
  return AlphaMatte<T>(read_gray_grid<T>(path));
}

/// Segmentation labels must be strictly two-valued on disk (0 or 255).
inline SegMask read_seg_mask(const std::string& path) {
  const RawImage raw = read_png(path, 1);
  PixelGrid<std::uint8_t> out(raw.height, raw.width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t v = raw.pixels[i];
    if (v != 0 && v != 255)
      throw std::runtime_error("segmentation label '" + path + "' holds value " +
                               std::to_string(v) + "; expected only 0 or 255");
    out.data()[i] = v == 255 ? 1 : 0;
  }
  return SegMask(std::move(out));
}

template <typename T>
void write_rgb_image(const std::string& path, const RgbImage<T>& img) {
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(img.height()) * img.width() * 3);
  std::uint8_t* p = buf.data();
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < 3; ++c) *p++ = detail::to_u8(img.at(c, y, x));
  write_png(path, img.height(), img.width(), 3, buf.data());
}

template <typename T>
void write_gray_grid(const std::string& path, const PixelGrid<T>& g) {
  std::vector<std::uint8_t> buf(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] = detail::to_u8(g.data()[i]);
  write_png(path, g.height(), g.width(), 1, buf.data());
}

template <typename T>
void write_alpha_matte(const std::string& path, const AlphaMatte<T>& m) {
  write_gray_grid(path, m.grid());
}

inline void write_seg_mask(const std::string& path, const SegMask& m) {
  std::vector<std::uint8_t> buf(m.grid().size());
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = m.grid().data()[i] ? 255 : 0;
  write_png(path, m.height(), m.width(), 1, buf.data());
}

}  // namespace matteblend
