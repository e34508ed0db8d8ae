#pragma once

// Evaluation metrics: MSE and SAD over the whole frame and over the boundary
// band of the ground truth. Reported numbers use the conventional scales
// (MSE x 1e3, SAD / 1e3); the constants below are the single source of truth.

#include "matteblend/core/grid.hpp"
#include "matteblend/core/image_ops.hpp"
#include "matteblend/labels.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

inline constexpr double kMseReportScale = 1e3;
inline constexpr double kSadReportScale = 1e-3;

/// The evaluation band is the same strict (0.05, 0.95) rule used for labels.
template <typename T>
BoundaryMask eval_region_mask(const AlphaMatte<T>& gt) {
  return extract_boundary(gt);
}

struct ImageMetrics {
  double mse_whole = 0.0;
  double sad_whole = 0.0;
  std::optional<double> mse_boundary;  // absent when gt has no boundary band
  std::optional<double> sad_boundary;
};

template <typename T>
ImageMetrics image_metrics(const AlphaMatte<T>& pred, const AlphaMatte<T>& gt) {
  require_same_dims(pred.height(), pred.width(), gt.height(), gt.width(), "image_metrics");
  const std::size_t size = static_cast<std::size_t>(gt.height()) * gt.width();
  using Arr = Eigen::Array<double, Eigen::Dynamic, 1>;
  Arr diff(size);
  for (std::size_t i = 0; i < size; ++i)
    diff[static_cast<Eigen::Index>(i)] = static_cast<double>(pred.grid().data()[i]) -
                                         static_cast<double>(gt.grid().data()[i]);

  ImageMetrics m;
  m.mse_whole = diff.square().sum() / static_cast<double>(size) * kMseReportScale;
  m.sad_whole = diff.abs().sum() * kSadReportScale;

  const BoundaryMask band = eval_region_mask(gt);
  Arr mask(size);
  for (std::size_t i = 0; i < size; ++i)
    mask[static_cast<Eigen::Index>(i)] = static_cast<double>(band.grid().data()[i]);
  const double n_band = mask.sum();
  if (n_band > 0.0) {
    m.mse_boundary = (diff.square() * mask).sum() / n_band * kMseReportScale;
    m.sad_boundary = (diff.abs() * mask).sum() * kSadReportScale;
  }
  return m;
}

struct PerImageMetrics {
  std::string id;
  ImageMetrics values;
};

/// Aggregates are means of the per-image values; images without a boundary
/// band are excluded from the boundary means and counted.
struct MetricReport {
  std::string dataset_id;
  int n_images = 0;
  int n_boundary_skipped = 0;
  int n_unreadable = 0;
  double mse_whole = 0.0;
  double sad_whole = 0.0;
  std::optional<double> mse_boundary;
  std::optional<double> sad_boundary;
  std::vector<PerImageMetrics> per_image;
};

inline MetricReport aggregate_metrics(std::string dataset_id,
                                      std::vector<PerImageMetrics> per_image,
                                      int n_unreadable = 0) {
  MetricReport r;
  r.dataset_id = std::move(dataset_id);
  r.per_image = std::move(per_image);
  r.n_images = static_cast<int>(r.per_image.size());
  r.n_unreadable = n_unreadable;
  if (r.n_images == 0) return r;
  double mw = 0, sw = 0, mb = 0, sb = 0;
  int n_band = 0;
  for (const PerImageMetrics& pm : r.per_image) {
    mw += pm.values.mse_whole;
    sw += pm.values.sad_whole;
    if (pm.values.mse_boundary) {
      mb += *pm.values.mse_boundary;
      sb += *pm.values.sad_boundary;
      ++n_band;
    }
  }
  r.mse_whole = mw / r.n_images;
  r.sad_whole = sw / r.n_images;
  r.n_boundary_skipped = r.n_images - n_band;
  if (n_band > 0) {
    r.mse_boundary = mb / n_band;
    r.sad_boundary = sb / n_band;
  }
  return r;
}

struct EvalProtocol {
  int shorter_edge = 512;  // toy profile uses 128

  bool operator==(const EvalProtocol&) const = default;
};

namespace detail {
/// Resize so the shorter edge hits the target, preserving aspect ratio.
inline std::pair<int, int> protocol_dims(int h, int w, int shorter_edge) {
  if (h <= w) {
    const int nw = std::max(1, static_cast<int>(std::lround(
                                   static_cast<double>(w) * shorter_edge / h)));
    return {shorter_edge, nw};
  }
  const int nh =
      std::max(1, static_cast<int>(std::lround(static_cast<double>(h) * shorter_edge / w)));
  return {nh, shorter_edge};
}
}  // namespace detail

/// predict is called with the protocol-resized image and must return a matte
/// of the same size (the network wrapper handles divisibility padding
/// internally). The prediction is resized back to the native gt resolution
/// before metrics are taken.
template <typename T, typename Predict>
AlphaMatte<T> predict_matte(const RgbImage<T>& image, const EvalProtocol& protocol,
                            Predict&& predict) {
  auto [ph, pw] = detail::protocol_dims(image.height(), image.width(), protocol.shorter_edge);
  const RgbImage<T> resized = resize_bilinear(image, ph, pw);
  AlphaMatte<T> pred = predict(resized);
  if (pred.height() != ph || pred.width() != pw)
    throw std::runtime_error("predictor changed the working resolution");
  if (pred.height() == image.height() && pred.width() == image.width()) return pred;
  PixelGrid<T> native = resize_bilinear(pred.grid(), image.height(), image.width());
  for (std::size_t i = 0; i < native.size(); ++i)
    native.data()[i] = std::min(T(1), std::max(T(0), native.data()[i]));
  return AlphaMatte<T>(std::move(native));
}

/// load is called per entry id and must return {image, gt}; failures are
/// logged, skipped and counted. predict as in predict_matte.
template <typename T, typename Load, typename Predict>
MetricReport evaluate_dataset(std::string dataset_id, const std::vector<std::string>& ids,
                              const EvalProtocol& protocol, Load&& load, Predict&& predict) {
  if (ids.empty()) throw std::invalid_argument("evaluate_dataset: empty evaluation set");
  std::vector<PerImageMetrics> per_image;
  per_image.reserve(ids.size());
  int n_unreadable = 0;
  for (const std::string& id : ids) {
    std::pair<RgbImage<T>, AlphaMatte<T>> sample;
    try {
      sample = load(id);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: skipping eval image '%s': %s\n", id.c_str(), e.what());
      ++n_unreadable;
      continue;
    }
    AlphaMatte<T> pred = predict_matte(sample.first, protocol, predict);
    per_image.push_back({id, image_metrics(pred, sample.second)});
  }
  if (per_image.empty())
    throw std::runtime_error("evaluate_dataset: no readable images in '" + dataset_id + "'");
  return aggregate_metrics(std::move(dataset_id), std::move(per_image), n_unreadable);
}

inline void to_json(nlohmann::json& j, const ImageMetrics& m) {
  j = nlohmann::json{{"mse_whole", m.mse_whole}, {"sad_whole", m.sad_whole}};
  j["mse_boundary"] = m.mse_boundary ? nlohmann::json(*m.mse_boundary) : nlohmann::json();
  j["sad_boundary"] = m.sad_boundary ? nlohmann::json(*m.sad_boundary) : nlohmann::json();
}

inline void from_json(const nlohmann::json& j, ImageMetrics& m) {
  j.at("mse_whole").get_to(m.mse_whole);
  j.at("sad_whole").get_to(m.sad_whole);
  m.mse_boundary.reset();
  m.sad_boundary.reset();
  if (!j.at("mse_boundary").is_null()) m.mse_boundary = j.at("mse_boundary").get<double>();
  if (!j.at("sad_boundary").is_null()) m.sad_boundary = j.at("sad_boundary").get<double>();
}

inline void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"dataset_id", r.dataset_id},
                     {"n_images", r.n_images},
                     {"n_boundary_skipped", r.n_boundary_skipped},
                     {"n_unreadable", r.n_unreadable},
                     {"mse_scale", kMseReportScale},
                     {"sad_scale", kSadReportScale},
                     {"mse_whole", r.mse_whole},
                     {"sad_whole", r.sad_whole}};
  j["mse_boundary"] = r.mse_boundary ? nlohmann::json(*r.mse_boundary) : nlohmann::json();
  j["sad_boundary"] = r.sad_boundary ? nlohmann::json(*r.sad_boundary) : nlohmann::json();
  nlohmann::json per = nlohmann::json::array();
  for (const PerImageMetrics& pm : r.per_image) {
    nlohmann::json e = pm.values;
    e["id"] = pm.id;
    per.push_back(std::move(e));
  }
  j["per_image"] = std::move(per);
}

inline void from_json(const nlohmann::json& j, MetricReport& r) {
  j.at("dataset_id").get_to(r.dataset_id);
  j.at("n_images").get_to(r.n_images);
  j.at("n_boundary_skipped").get_to(r.n_boundary_skipped);
  j.at("n_unreadable").get_to(r.n_unreadable);
  j.at("mse_whole").get_to(r.mse_whole);
  j.at("sad_whole").get_to(r.sad_whole);
  r.mse_boundary.reset();
  r.sad_boundary.reset();
  if (!j.at("mse_boundary").is_null()) r.mse_boundary = j.at("mse_boundary").get<double>();
  if (!j.at("sad_boundary").is_null()) r.sad_boundary = j.at("sad_boundary").get<double>();
  r.per_image.clear();
  for (const auto& e : j.at("per_image")) {
    PerImageMetrics pm;
    pm.id = e.at("id").get<std::string>();
    pm.values = e.get<ImageMetrics>();
    r.per_image.push_back(std::move(pm));
  }
}

}  // namespace matteblend
