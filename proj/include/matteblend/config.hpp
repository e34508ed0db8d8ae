#pragma once

// Experiment configuration: one JSON document covering data locations, subset
// sizes, network shape, the three stage schedules, augmentation, loss and the
// evaluation protocol. A `profile` key ("toy" or "paper") picks the default
// bundle; explicit keys override it. Unknown keys anywhere are errors, so a
// typo can never silently fall back to a default.

#include "matteblend/augment.hpp"
#include "matteblend/losses.hpp"
#include "matteblend/metrics.hpp"
#include "matteblend/nn/network.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

enum class Stage { seg_pretrain, teacher_finetune, student_mlb };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::seg_pretrain: return "seg_pretrain";
    case Stage::teacher_finetune: return "teacher_finetune";
    case Stage::student_mlb: return "student_mlb";
  }
  return "?";
}

inline Stage stage_from_string(const std::string& s) {
  if (s == "seg_pretrain") return Stage::seg_pretrain;
  if (s == "teacher_finetune") return Stage::teacher_finetune;
  if (s == "student_mlb") return Stage::student_mlb;
  throw std::invalid_argument("unknown stage: " + s);
}

struct StageConfig {
  double lr = 5e-5;
  int iterations = 1000;
  int batch_size = 16;
  double ema_momentum = 0.999;
  bool use_ema = true;          // student_mlb only
  bool use_weak_strong = true;  // student_mlb only

  bool operator==(const StageConfig&) const = default;
};

struct DataPaths {
  std::string seg_dir;
  std::string matte_fg_dir;
  std::string backgrounds_dir;
  std::map<std::string, std::string> eval_sets;  // name -> alpha-labelled dir

  bool operator==(const DataPaths&) const = default;
};

struct ExperimentConfig {
  std::string profile = "toy";
  std::uint64_t seed = 1;
  DataPaths data;
  int seg_n = -1;  // -1 selects the full set
  int mat_n = -1;
  NetworkConfig network;
  StageConfig seg_pretrain;
  StageConfig teacher_finetune;
  StageConfig student_mlb;
  AugmentConfig augment;
  LossConfig loss;
  EvalProtocol eval;
  std::string output_dir = "runs/default";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Paper-scale schedule: the published learning rates and iteration counts.
inline ExperimentConfig paper_defaults() {
  ExperimentConfig c;
  c.profile = "paper";
  c.network.preset = EncoderPreset::large;
  c.network.width_multiplier = 1.0;
  c.seg_pretrain = {1e-4, 200000, 16, 0.999, false, false};
  c.teacher_finetune = {5e-5, 10000, 16, 0.999, false, false};
  c.student_mlb = {5e-5, 20000, 16, 0.999, true, true};
  c.augment = AugmentConfig{};  // 512..768 crops
  c.eval.shorter_edge = 512;
  return c;
}

/// Desk-scale schedule for the procedural dataset: same pipeline, iteration
/// counts cut to roughly 1/100 with learning rates raised to compensate.
inline ExperimentConfig toy_defaults() {
  ExperimentConfig c;
  c.profile = "toy";
  c.network.preset = EncoderPreset::small;
  c.network.width_multiplier = 0.25;
  c.seg_pretrain = {1e-3, 2000, 8, 0.999, false, false};
  c.teacher_finetune = {2e-4, 100, 8, 0.999, false, false};
  c.student_mlb = {2e-4, 200, 8, 0.99, true, true};
  c.augment.crop_min = 64;
  c.augment.crop_max = 96;
  c.eval.shorter_edge = 128;
  return c;
}

inline ExperimentConfig profile_defaults(const std::string& profile) {
  if (profile == "toy") return toy_defaults();
  if (profile == "paper") return paper_defaults();
  throw std::invalid_argument("unknown profile: " + profile + " (expected toy or paper)");
}

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& path) {
  if (!j.is_object()) throw std::invalid_argument("config: " + path + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw std::invalid_argument("config: unknown key '" + path + key + "'");
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const StageConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"iterations", c.iterations},
                     {"batch_size", c.batch_size},
                     {"ema_momentum", c.ema_momentum},
                     {"use_ema", c.use_ema},
                     {"use_weak_strong", c.use_weak_strong}};
}

inline void stage_config_from_json(const nlohmann::json& j, StageConfig& c,
                                   const std::string& path) {
  detail::check_keys(
      j, {"lr", "iterations", "batch_size", "ema_momentum", "use_ema", "use_weak_strong"}, path);
  detail::maybe(j, "lr", c.lr);
  detail::maybe(j, "iterations", c.iterations);
  detail::maybe(j, "batch_size", c.batch_size);
  detail::maybe(j, "ema_momentum", c.ema_momentum);
  detail::maybe(j, "use_ema", c.use_ema);
  detail::maybe(j, "use_weak_strong", c.use_weak_strong);
  if (c.iterations < 0) throw std::invalid_argument("config: " + path + "iterations negative");
  if (c.batch_size <= 0) throw std::invalid_argument("config: " + path + "batch_size must be > 0");
  if (c.ema_momentum < 0.0 || c.ema_momentum >= 1.0)
    throw std::invalid_argument("config: " + path + "ema_momentum outside [0, 1)");
}

inline void to_json(nlohmann::json& j, const DataPaths& d) {
  j = nlohmann::json{{"seg_dir", d.seg_dir},
                     {"matte_fg_dir", d.matte_fg_dir},
                     {"backgrounds_dir", d.backgrounds_dir},
                     {"eval_sets", d.eval_sets}};
}

inline void data_paths_from_json(const nlohmann::json& j, DataPaths& d, const std::string& path) {
  detail::check_keys(j, {"seg_dir", "matte_fg_dir", "backgrounds_dir", "eval_sets"}, path);
  detail::maybe(j, "seg_dir", d.seg_dir);
  detail::maybe(j, "matte_fg_dir", d.matte_fg_dir);
  detail::maybe(j, "backgrounds_dir", d.backgrounds_dir);
  if (j.contains("eval_sets"))
    d.eval_sets = j.at("eval_sets").get<std::map<std::string, std::string>>();
}

inline void to_json(nlohmann::json& j, const AugmentConfig& c) {
  j = nlohmann::json{{"scale_min", c.scale_min},   {"scale_max", c.scale_max},
                     {"crop_min", c.crop_min},     {"crop_max", c.crop_max},
                     {"hflip_prob", c.hflip_prob}, {"brightness", c.brightness},
                     {"contrast", c.contrast},     {"saturation", c.saturation},
                     {"hue", c.hue}};
}

inline void augment_config_from_json(const nlohmann::json& j, AugmentConfig& c,
                                     const std::string& path) {
  detail::check_keys(j,
                     {"scale_min", "scale_max", "crop_min", "crop_max", "hflip_prob",
                      "brightness", "contrast", "saturation", "hue"},
                     path);
  detail::maybe(j, "scale_min", c.scale_min);
  detail::maybe(j, "scale_max", c.scale_max);
  detail::maybe(j, "crop_min", c.crop_min);
  detail::maybe(j, "crop_max", c.crop_max);
  detail::maybe(j, "hflip_prob", c.hflip_prob);
  detail::maybe(j, "brightness", c.brightness);
  detail::maybe(j, "contrast", c.contrast);
  detail::maybe(j, "saturation", c.saturation);
  detail::maybe(j, "hue", c.hue);
}

inline void to_json(nlohmann::json& j, const LossConfig& c) {
  j = nlohmann::json{{"lambda_boundary", c.lambda_boundary},
                     {"grad_op", c.grad_op == GradOperator::sobel ? "sobel" : "forward_diff"}};
}

inline void loss_config_from_json(const nlohmann::json& j, LossConfig& c,
                                  const std::string& path) {
  detail::check_keys(j, {"lambda_boundary", "grad_op"}, path);
  detail::maybe(j, "lambda_boundary", c.lambda_boundary);
  if (j.contains("grad_op")) {
    const std::string op = j.at("grad_op").get<std::string>();
    if (op == "sobel")
      c.grad_op = GradOperator::sobel;
    else if (op == "forward_diff")
      c.grad_op = GradOperator::forward_diff;
    else
      throw std::invalid_argument("config: " + path + "grad_op must be forward_diff or sobel");
  }
}

inline void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"profile", c.profile},
                     {"seed", c.seed},
                     {"data", c.data},
                     {"seg_n", c.seg_n},
                     {"mat_n", c.mat_n},
                     {"network", c.network},
                     {"stages",
                      {{"seg_pretrain", c.seg_pretrain},
                       {"teacher_finetune", c.teacher_finetune},
                       {"student_mlb", c.student_mlb}}},
                     {"augment", c.augment},
                     {"loss", c.loss},
                     {"eval", {{"shorter_edge", c.eval.shorter_edge}}},
                     {"output_dir", c.output_dir}};
}

/// Profile-aware parse: defaults come from the named profile, every present
/// key overrides, unknown keys anywhere throw with their full path.
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  detail::check_keys(j,
                     {"profile", "seed", "data", "seg_n", "mat_n", "network", "stages", "augment",
                      "loss", "eval", "output_dir"},
                     "");
  ExperimentConfig c =
      profile_defaults(j.contains("profile") ? j.at("profile").get<std::string>() : "toy");
  detail::maybe(j, "seed", c.seed);
  if (j.contains("data")) data_paths_from_json(j.at("data"), c.data, "data.");
  detail::maybe(j, "seg_n", c.seg_n);
  detail::maybe(j, "mat_n", c.mat_n);
  if (j.contains("network")) {
    detail::check_keys(j.at("network"),
                       {"preset", "width_multiplier", "in_channels", "pyramid_dilations"},
                       "network.");
    nlohmann::json merged = c.network;
    merged.update(j.at("network"));
    c.network = merged.get<NetworkConfig>();
  }
  if (j.contains("stages")) {
    const auto& st = j.at("stages");
    detail::check_keys(st, {"seg_pretrain", "teacher_finetune", "student_mlb"}, "stages.");
    if (st.contains("seg_pretrain"))
      stage_config_from_json(st.at("seg_pretrain"), c.seg_pretrain, "stages.seg_pretrain.");
    if (st.contains("teacher_finetune"))
      stage_config_from_json(st.at("teacher_finetune"), c.teacher_finetune,
                             "stages.teacher_finetune.");
    if (st.contains("student_mlb"))
      stage_config_from_json(st.at("student_mlb"), c.student_mlb, "stages.student_mlb.");
  }
  if (j.contains("augment")) augment_config_from_json(j.at("augment"), c.augment, "augment.");
  if (j.contains("loss")) loss_config_from_json(j.at("loss"), c.loss, "loss.");
  if (j.contains("eval")) {
    detail::check_keys(j.at("eval"), {"shorter_edge"}, "eval.");
    detail::maybe(j.at("eval"), "shorter_edge", c.eval.shorter_edge);
  }
  detail::maybe(j, "output_dir", c.output_dir);
  return c;
}

inline void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  c = experiment_config_from_json(j);
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config file " + path + ": " + e.what());
  }
  return experiment_config_from_json(j);
}

inline void save_config_file(const std::string& path, const ExperimentConfig& c) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << nlohmann::json(c).dump(2) << "\n";
}

/// Applies one `--set dotted.path=value` override onto the raw JSON document
/// before parsing. The value is parsed as JSON when possible so numbers and
/// booleans keep their type; anything unparsable is taken as a string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0)
    throw std::invalid_argument("--set expects key.path=value, got: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);

  nlohmann::json value;
  try {
    value = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error&) {
    value = raw;
  }

  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) throw std::invalid_argument("--set has an empty path segment: " + assignment);
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

/// Cross-field checks shared by every entry point that trains.
inline void validate_for_training(const ExperimentConfig& c) {
  if (c.seg_n == 0 && c.mat_n == 0)
    throw std::invalid_argument("config: no training data (seg_n and mat_n are both 0)");
  if (c.augment.crop_min > c.augment.crop_max)
    throw std::invalid_argument("config: augment.crop_min exceeds crop_max");
  if (c.augment.scale_min > c.augment.scale_max)
    throw std::invalid_argument("config: augment.scale_min exceeds scale_max");
  if (c.output_dir.empty()) throw std::invalid_argument("config: output_dir is empty");
}

}  // namespace matteblend
