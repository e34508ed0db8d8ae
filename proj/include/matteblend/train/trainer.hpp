#pragma once

// The three-stage pipeline. Stage 0 pretrains on coarse masks with plain MSE.
// Stage 1 fine-tunes a teacher on freshly composed synthetic mattes under the
// full loss. Stage 2 freezes the teacher, blends its pseudo labels with the
// coarse masks and trains the student on the blend, optionally feeding the
// student back into the teacher by EMA.
//
// Every stage draws its per-step randomness as Rng(stage_seed).stream(step),
// and per-sample randomness as substreams of that, so runs are reproducible
// and batches are independent of how much entropy earlier steps consumed.

#include "matteblend/augment.hpp"
#include "matteblend/config.hpp"
#include "matteblend/core/rng.hpp"
#include "matteblend/data/batch.hpp"
#include "matteblend/data/compose.hpp"
#include "matteblend/data/manifest.hpp"
#include "matteblend/labels.hpp"
#include "matteblend/losses.hpp"
#include "matteblend/metrics.hpp"
#include "matteblend/nn/checkpoint.hpp"
#include "matteblend/nn/network.hpp"
#include "matteblend/opt/adam.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matteblend {

/// JSON-lines training log; a default-constructed instance discards records.
class TrainLog {
 public:
  TrainLog() = default;
  explicit TrainLog(const std::string& path) : out_(std::make_unique<std::ofstream>(path)) {
    if (!*out_) throw std::runtime_error("cannot open training log: " + path);
  }

  void record(Stage stage, std::uint64_t step, double lr, const LossBreakdown& lb) {
    if (!out_) return;
    nlohmann::json j{{"stage", to_string(stage)}, {"step", step},          {"lr", lr},
                     {"l_mse", lb.mse},           {"l_grad", lb.grad},     {"l_boundary", lb.boundary},
                     {"total", lb.total}};
    *out_ << j.dump() << "\n";
  }

  void flush() {
    if (out_) out_->flush();
  }

 private:
  std::unique_ptr<std::ofstream> out_;
};

namespace train_detail {

inline void require_finite(double total, Stage stage, std::uint64_t step) {
  if (!std::isfinite(total))
    throw std::runtime_error(std::string("training aborted: non-finite loss in ") +
                             to_string(stage) + " at step " + std::to_string(step));
}

template <typename T>
Tensor<T> cast_batch(Tensor<float> b) {
  if constexpr (std::is_same_v<T, float>)
    return b;
  else
    return b.template cast<T>();
}

/// Batches need one shape, so the crop side is drawn once per step and pinned
/// for every slot; scale, origin and flip stay per-slot.
inline AugmentConfig pin_crop_side(const AugmentConfig& aug, const Rng& step_rng) {
  Rng side_rng = step_rng.stream(hash_string("batch_crop_side"));
  AugmentConfig pinned = aug;
  pinned.crop_min = pinned.crop_max =
      static_cast<int>(side_rng.uniform_int(aug.crop_min, aug.crop_max));
  return pinned;
}

}  // namespace train_detail

/// One seg-domain batch: the weak view is geometry only; the strong view adds
/// photometric jitter when enabled, else aliases the weak view. The mask is
/// transformed with the same geometry (nearest neighbor).
template <typename T>
struct SegBatch {
  Tensor<T> weak;
  Tensor<T> strong;
  Tensor<T> seg;
};

template <typename T>
SegBatch<T> make_seg_batch(const std::vector<const SegSample*>& batch, const AugmentConfig& aug,
                           const Rng& step_rng, bool photo_jitter) {
  if (batch.empty()) throw std::invalid_argument("make_seg_batch: empty batch");
  const AugmentConfig step_aug = train_detail::pin_crop_side(aug, step_rng);
  std::vector<RgbImage<float>> weak, strong;
  std::vector<SegMask> segs;
  weak.reserve(batch.size());
  strong.reserve(batch.size());
  segs.reserve(batch.size());
  for (std::size_t slot = 0; slot < batch.size(); ++slot) {
    const SegSample& s = *batch[slot];
    Rng r = step_rng.stream(slot);
    const GeoTransform geo = sample_geo(r, s.image.height(), s.image.width(), step_aug);
    RgbImage<float> w = apply_geo(geo, s.image);
    segs.push_back(apply_geo(geo, s.seg));
    if (photo_jitter)
      strong.push_back(apply_photo(sample_photo(r, aug), w));
    else
      strong.push_back(w);
    weak.push_back(std::move(w));
  }
  return {train_detail::cast_batch<T>(batch_from_images(weak)),
          train_detail::cast_batch<T>(batch_from_images(strong)),
          train_detail::cast_batch<T>(batch_from_masks<float>(segs))};
}

/// One synthetic-matte batch: foregrounds composed onto deterministic
/// background picks, geometry applied to image and matte together, boundary
/// targets re-derived from the transformed matte.
template <typename T>
struct MatteBatch {
  Tensor<T> images;
  Tensor<T> matte;
  Tensor<T> boundary;
};

template <typename T>
MatteBatch<T> make_matte_batch(const std::vector<const MatteSample*>& batch,
                               const std::vector<RgbImage<float>>& backgrounds,
                               std::uint64_t bg_seed, std::uint64_t first_index,
                               const AugmentConfig& aug, const Rng& step_rng) {
  if (batch.empty()) throw std::invalid_argument("make_matte_batch: empty batch");
  const AugmentConfig step_aug = train_detail::pin_crop_side(aug, step_rng);
  std::vector<RgbImage<float>> images;
  std::vector<AlphaMatte<float>> mattes;
  std::vector<BoundaryMask> bands;
  for (std::size_t slot = 0; slot < batch.size(); ++slot) {
    auto [img, matte] =
        compose_matte_sample(*batch[slot], backgrounds, bg_seed, first_index + slot);
    Rng r = step_rng.stream(slot);
    const GeoTransform geo = sample_geo(r, img.height(), img.width(), step_aug);
    AlphaMatte<float> matte_geo = apply_geo(geo, matte);
    images.push_back(apply_geo(geo, img));
    bands.push_back(extract_boundary(matte_geo));
    mattes.push_back(std::move(matte_geo));
  }
  return {train_detail::cast_batch<T>(batch_from_images(images)),
          train_detail::cast_batch<T>(batch_from_mattes(mattes)),
          train_detail::cast_batch<T>(batch_from_masks<float>(bands))};
}

/// MSE against the coarse mask treated as a matte; the boundary head rides
/// along with zero gradient.
template <typename T>
void pretrain_seg(MattingNetwork<T>& net, const std::vector<SegSample>& data,
                  const StageConfig& cfg, const AugmentConfig& aug, std::uint64_t stage_seed,
                  TrainLog* log = nullptr) {
  if (data.empty()) throw std::invalid_argument("seg_pretrain: empty dataset");
  Adam<T> opt(net.parameters());
  for (std::uint64_t step = 0; step < static_cast<std::uint64_t>(cfg.iterations); ++step) {
    Rng step_rng = Rng(stage_seed).stream(step);
    std::vector<const SegSample*> batch(cfg.batch_size);
    for (auto& slot : batch)
      slot = &data[step_rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1)];
    SegBatch<T> b = make_seg_batch<T>(batch, aug, step_rng, /*photo_jitter=*/false);

    net.zero_grad();
    auto out = net.forward(b.weak, /*train=*/true);
    LossBreakdown lb;
    lb.mse = loss_mse(out.matte, b.seg);
    lb.total = lb.mse;
    train_detail::require_finite(lb.total, Stage::seg_pretrain, step);

    Tensor<T> dm = Tensor<T>::zeros_like(out.matte);
    loss_mse_backward(out.matte, b.seg, dm);
    Tensor<T> db = Tensor<T>::zeros_like(out.boundary);
    net.backward(dm, db);
    const double lr =
        cosine_lr(cfg.lr, step, static_cast<std::uint64_t>(cfg.iterations));
    opt.step(net.parameters(), lr);
    if (log) log->record(Stage::seg_pretrain, step, lr, lb);
  }
}

/// Full loss on freshly composed synthetic images; boundary targets come from
/// the transformed matte each step.
template <typename T>
void train_teacher(MattingNetwork<T>& net, const std::vector<MatteSample>& data,
                   const std::vector<RgbImage<float>>& backgrounds, const StageConfig& cfg,
                   const AugmentConfig& aug, const LossConfig& loss_cfg, std::uint64_t stage_seed,
                   TrainLog* log = nullptr) {
  if (data.empty()) throw std::invalid_argument("teacher_finetune: empty dataset");
  if (backgrounds.empty()) throw std::invalid_argument("teacher_finetune: empty background pool");
  Adam<T> opt(net.parameters());
  const std::uint64_t bg_seed = mix_seed(stage_seed, hash_string("backgrounds"));
  for (std::uint64_t step = 0; step < static_cast<std::uint64_t>(cfg.iterations); ++step) {
    Rng step_rng = Rng(stage_seed).stream(step);
    std::vector<const MatteSample*> batch(cfg.batch_size);
    for (auto& slot : batch)
      slot = &data[step_rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1)];
    MatteBatch<T> b = make_matte_batch<T>(batch, backgrounds, bg_seed,
                                          step * static_cast<std::uint64_t>(cfg.batch_size), aug,
                                          step_rng);

    net.zero_grad();
    auto out = net.forward(b.images, /*train=*/true);
    const LossBreakdown lb = loss_total(out.matte, b.matte, out.boundary, b.boundary, loss_cfg);
    train_detail::require_finite(lb.total, Stage::teacher_finetune, step);

    Tensor<T> dm = Tensor<T>::zeros_like(out.matte);
    Tensor<T> db = Tensor<T>::zeros_like(out.boundary);
    loss_total_backward(out.matte, b.matte, out.boundary, b.boundary, dm, db, loss_cfg);
    net.backward(dm, db);
    const double lr = cosine_lr(cfg.lr, step, static_cast<std::uint64_t>(cfg.iterations));
    opt.step(net.parameters(), lr);
    if (log) log->record(Stage::teacher_finetune, step, lr, lb);
  }
}

/// Eval-mode teacher pass; the boundary head is binarized at 0.5. Nothing is
/// cached, so no gradient can reach the teacher through these labels.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> generate_pseudo_labels(MattingNetwork<T>& teacher,
                                                       const Tensor<T>& weak_images) {
  auto out = teacher.forward(weak_images, /*train=*/false);
  Tensor<T> alpha = binarize_boundary_batch(out.boundary);
  return {std::move(out.matte), std::move(alpha)};
}

template <typename T>
struct StudentState {
  MattingNetwork<T> student;
  std::optional<MattingNetwork<T>> teacher;  // frozen; written only by EMA
  Adam<T> optimizer;
  StageConfig cfg;
  AugmentConfig aug;
  LossConfig loss;
  std::uint64_t stage_seed = 0;
  std::uint64_t step = 0;
};

/// Validates the EMA applicability rule up front: EMA needs a teacher with an
/// architecture identical to the student's, and a mismatch is a configuration
/// error rather than a silent skip.
template <typename T>
StudentState<T> make_student_state(MattingNetwork<T> student,
                                   std::optional<MattingNetwork<T>> teacher,
                                   const StageConfig& cfg, const AugmentConfig& aug,
                                   const LossConfig& loss, std::uint64_t stage_seed) {
  if (cfg.use_ema) {
    if (!teacher)
      throw std::invalid_argument("student_mlb: use_ema requires a teacher network");
    if (!(teacher->config() == student.config()))
      throw std::invalid_argument(
          "student_mlb: use_ema requires identical teacher and student architectures");
  }
  Adam<T> opt(student.parameters());
  return StudentState<T>{std::move(student), std::move(teacher), std::move(opt),
                         cfg,                aug,                loss,
                         stage_seed,         0};
}

/// One student update. With a teacher present the target is the blended label
/// M-bar = alpha' * M' + (1 - alpha') * S on the weak view; without one (the
/// zero-matte degenerate path) the target is the raw mask. The student sees
/// the strong view. Only the matte objective trains this stage.
template <typename T>
LossBreakdown student_step(StudentState<T>& st, const std::vector<const SegSample*>& batch) {
  Rng step_rng = Rng(st.stage_seed).stream(st.step);
  SegBatch<T> b = make_seg_batch<T>(batch, st.aug, step_rng, st.cfg.use_weak_strong);

  Tensor<T> target;
  if (st.teacher) {
    auto [pseudo_matte, pseudo_alpha] = generate_pseudo_labels(*st.teacher, b.weak);
    target = blend_matte_batch(pseudo_matte, pseudo_alpha, b.seg);
  } else {
    target = std::move(b.seg);
  }

  st.student.zero_grad();
  auto out = st.student.forward(b.strong, /*train=*/true);
  LossBreakdown lb;
  lb.mse = loss_mse(out.matte, target);
  lb.grad = loss_grad(out.matte, target, st.loss.grad_op);
  lb.boundary = 0.0;
  lb.total = lb.mse + lb.grad;
  train_detail::require_finite(lb.total, Stage::student_mlb, st.step);

  Tensor<T> dm = Tensor<T>::zeros_like(out.matte);
  loss_mse_backward(out.matte, target, dm);
  loss_grad_backward(out.matte, target, dm, T(1), st.loss.grad_op);
  Tensor<T> db = Tensor<T>::zeros_like(out.boundary);
  st.student.backward(dm, db);

  st.optimizer.step(st.student.parameters(),
                    cosine_lr(st.cfg.lr, st.step, static_cast<std::uint64_t>(st.cfg.iterations)));
  if (st.cfg.use_ema)
    ema_update(st.teacher->parameters(), st.student.parameters(), st.cfg.ema_momentum);
  ++st.step;
  return lb;
}

template <typename T>
void run_student_stage(StudentState<T>& st, const std::vector<SegSample>& data,
                       TrainLog* log = nullptr) {
  if (data.empty()) throw std::invalid_argument("student_mlb: empty dataset");
  while (st.step < static_cast<std::uint64_t>(st.cfg.iterations)) {
    Rng step_rng = Rng(st.stage_seed).stream(st.step);
    std::vector<const SegSample*> batch(st.cfg.batch_size);
    for (auto& slot : batch)
      slot = &data[step_rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1)];
    const double lr =
        cosine_lr(st.cfg.lr, st.step, static_cast<std::uint64_t>(st.cfg.iterations));
    const std::uint64_t step_before = st.step;
    const LossBreakdown lb = student_step(st, batch);
    if (log) log->record(Stage::student_mlb, step_before, lr, lb);
  }
}

/// Shorter-edge protocol evaluation of a network against a matte-labelled
/// manifest (images/ + labels/ with exact alpha).
template <typename T>
MetricReport evaluate_manifest(MattingNetwork<T>& net, const std::string& dataset_id,
                               const DatasetManifest& manifest, const EvalProtocol& protocol) {
  std::vector<std::string> ids;
  std::map<std::string, const ManifestEntry*> by_id;
  for (const ManifestEntry& e : manifest.entries) {
    ids.push_back(e.id);
    by_id[e.id] = &e;
  }
  auto load = [&](const std::string& id) {
    MatteSample s = load_matte_sample(*by_id.at(id));
    if constexpr (std::is_same_v<T, float>) {
      return std::pair<RgbImage<T>, AlphaMatte<T>>{std::move(s.fg), std::move(s.matte)};
    } else {
      RgbImage<T> img(s.fg.height(), s.fg.width());
      PixelGrid<T> gt(s.matte.height(), s.matte.width());
      for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < img.plane(c).size(); ++i)
          img.plane(c).data()[i] = static_cast<T>(s.fg.plane(c).data()[i]);
      for (std::size_t i = 0; i < gt.size(); ++i)
        gt.data()[i] = static_cast<T>(s.matte.grid().data()[i]);
      return std::pair<RgbImage<T>, AlphaMatte<T>>{std::move(img), AlphaMatte<T>(std::move(gt))};
    }
  };
  auto predict = [&](const RgbImage<T>& img) {
    Tensor<T> x(1, 3, img.height(), img.width());
    copy_image_into(x, 0, img);
    auto out = net.forward(x, /*train=*/false);
    return matte_from_tensor(out.matte, 0);
  };
  return evaluate_dataset<T>(dataset_id, ids, protocol, load, predict);
}

struct PipelineArtifacts {
  Stage final_stage = Stage::student_mlb;  // which stage produced the final net
  std::string final_checkpoint;
  std::map<std::string, MetricReport> reports;
};

inline std::vector<SegSample> load_seg_samples(const DatasetManifest& m) {
  std::vector<SegSample> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(load_seg_sample(e));
  return out;
}

inline std::vector<MatteSample> load_matte_samples(const DatasetManifest& m) {
  std::vector<MatteSample> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) out.push_back(load_matte_sample(e));
  return out;
}

inline std::vector<RgbImage<float>> load_background_pool(const std::string& dir) {
  std::vector<RgbImage<float>> out;
  for (const std::string& path : list_png_files(dir)) out.push_back(read_rgb_image<float>(path));
  if (out.empty()) throw std::runtime_error("background pool is empty: " + dir);
  return out;
}

/// Manifest restricted to `count` entries under the subset protocol; a
/// negative count keeps the full set.
inline DatasetManifest manifest_subset(const std::string& dir, LabelKind kind, int count,
                                       std::uint64_t seed) {
  DatasetManifest m = load_manifest(dir, kind);
  if (count < 0) return m;
  return sample_subset(m, static_cast<std::size_t>(count), seed);
}

/// The full pipeline at float precision. Degenerate corners follow the subset
/// grid semantics: mat_n=0 drops the teacher and trains the student on raw
/// masks; seg_n=0 drops pretraining and the student stage, and the teacher is
/// reported as the final network.
inline PipelineArtifacts run_pipeline(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  validate_for_training(cfg);
  fs::create_directories(cfg.output_dir);
  TrainLog log(cfg.output_dir + "/train_log.jsonl");
  save_config_file(cfg.output_dir + "/config.json", cfg);

  const std::uint64_t init_seed = mix_seed(cfg.seed, hash_string("network_init"));
  const bool use_seg = cfg.seg_n != 0;
  const bool use_mat = cfg.mat_n != 0;

  auto stage_seed = [&](Stage s) { return mix_seed(cfg.seed, hash_string(to_string(s))); };
  auto checkpoint_path = [&](Stage s, int iterations) {
    return cfg.output_dir + "/" + to_string(s) + "_" + std::to_string(iterations) + ".ckpt";
  };
  auto run_stage = [](Stage s, auto&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string(to_string(s)) + ": " + e.what());
    }
  };

  // Stage 0: segmentation pretraining.
  std::optional<MattingNetwork<float>> pretrained;
  if (use_seg) {
    run_stage(Stage::seg_pretrain, [&] {
      const DatasetManifest seg_manifest = manifest_subset(
          cfg.data.seg_dir, LabelKind::seg, cfg.seg_n, cfg.seed);
      const std::vector<SegSample> seg_data = load_seg_samples(seg_manifest);
      pretrained.emplace(cfg.network, init_seed);
      pretrain_seg(*pretrained, seg_data, cfg.seg_pretrain, cfg.augment,
                   stage_seed(Stage::seg_pretrain), &log);
      save_checkpoint(checkpoint_path(Stage::seg_pretrain, cfg.seg_pretrain.iterations),
                      *pretrained, cfg.seg_pretrain.iterations);
    });
  }

  // Stage 1: teacher fine-tuning on synthetic composites.
  std::optional<MattingNetwork<float>> teacher;
  if (use_mat) {
    run_stage(Stage::teacher_finetune, [&] {
      const DatasetManifest matte_manifest = manifest_subset(
          cfg.data.matte_fg_dir, LabelKind::matte_fg, cfg.mat_n, cfg.seed);
      const std::vector<MatteSample> matte_data =
          load_matte_samples(matte_manifest);
      const std::vector<RgbImage<float>> backgrounds =
          load_background_pool(cfg.data.backgrounds_dir);
      teacher.emplace(pretrained ? *pretrained : MattingNetwork<float>(cfg.network, init_seed));
      train_teacher(*teacher, matte_data, backgrounds, cfg.teacher_finetune, cfg.augment,
                    cfg.loss, stage_seed(Stage::teacher_finetune), &log);
      save_checkpoint(checkpoint_path(Stage::teacher_finetune, cfg.teacher_finetune.iterations),
                      *teacher, cfg.teacher_finetune.iterations);
    });
  }

  // Stage 2: student training on blended labels (or raw masks without a
  // teacher). Skipped entirely when there is no seg data; the teacher is then
  // the final network.
  std::optional<MattingNetwork<float>> student;
  if (use_seg) {
    run_stage(Stage::student_mlb, [&] {
      const DatasetManifest seg_manifest = manifest_subset(
          cfg.data.seg_dir, LabelKind::seg, cfg.seg_n, cfg.seed);
      const std::vector<SegSample> seg_data = load_seg_samples(seg_manifest);
      StageConfig stage_cfg = cfg.student_mlb;
      if (!teacher) stage_cfg.use_ema = false;  // nothing to couple to
      StudentState<float> st = make_student_state(
          MattingNetwork<float>(*pretrained),
          teacher ? std::optional<MattingNetwork<float>>(MattingNetwork<float>(*teacher))
                  : std::nullopt,
          stage_cfg, cfg.augment, cfg.loss, stage_seed(Stage::student_mlb));
      run_student_stage(st, seg_data, &log);
      student.emplace(std::move(st.student));
      save_checkpoint(checkpoint_path(Stage::student_mlb, stage_cfg.iterations), *student,
                      stage_cfg.iterations);
    });
  }

  PipelineArtifacts artifacts;
  MattingNetwork<float>* final_net = nullptr;
  if (student) {
    final_net = &*student;
    artifacts.final_stage = Stage::student_mlb;
  } else {
    final_net = &*teacher;
    artifacts.final_stage = Stage::teacher_finetune;
  }
  artifacts.final_checkpoint = cfg.output_dir + "/final.ckpt";
  save_checkpoint(artifacts.final_checkpoint, *final_net, 0);
  log.flush();

  // Evaluation on every configured eval set, each a matte-labelled manifest.
  fs::create_directories(cfg.output_dir + "/reports");
  for (const auto& [name, dir] : cfg.data.eval_sets) {
    const DatasetManifest eval_manifest = load_manifest(dir, LabelKind::matte_fg);
    MetricReport report = evaluate_manifest(*final_net, name, eval_manifest, cfg.eval);
    std::ofstream out(cfg.output_dir + "/reports/" + name + ".json");
    out << nlohmann::json(report).dump(2) << "\n";
    artifacts.reports.emplace(name, std::move(report));
  }

  // The combined report doubles as the completion marker for sweep resume.
  {
    nlohmann::json j;
    j["final_stage"] = to_string(artifacts.final_stage);
    j["final_checkpoint"] = artifacts.final_checkpoint;
    for (const auto& [name, report] : artifacts.reports) j["reports"][name] = report;
    std::ofstream out(cfg.output_dir + "/report.json");
    out << j.dump(2) << "\n";
  }
  return artifacts;
}

}  // namespace matteblend
