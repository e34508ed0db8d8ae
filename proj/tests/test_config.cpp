#include <catch2/catch_amalgamated.hpp>

#include "matteblend/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

using namespace matteblend;
using nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("profiles carry distinct schedules") {
  const ExperimentConfig toy = toy_defaults();
  const ExperimentConfig paper = paper_defaults();

  CHECK(toy.network.preset == EncoderPreset::small);
  CHECK(toy.network.width_multiplier == Catch::Approx(0.25));
  CHECK(paper.network.preset == EncoderPreset::large);
  CHECK(paper.network.width_multiplier == Catch::Approx(1.0));

  CHECK(paper.seg_pretrain.iterations == 200000);
  CHECK(paper.seg_pretrain.lr == Catch::Approx(1e-4));
  CHECK(paper.teacher_finetune.iterations == 10000);
  CHECK(paper.student_mlb.iterations == 20000);
  CHECK(paper.student_mlb.lr == Catch::Approx(5e-5));
  CHECK(paper.eval.shorter_edge == 512);
  CHECK(paper.augment.crop_min == 512);
  CHECK(paper.augment.crop_max == 768);

  CHECK(toy.eval.shorter_edge == 128);
  CHECK(toy.augment.crop_min == 64);
  CHECK(toy.augment.crop_max == 96);
  CHECK(toy.seg_pretrain.iterations < paper.seg_pretrain.iterations);

  // The student stage owns the coupling knobs in both profiles.
  for (const ExperimentConfig* c : {&toy, &paper}) {
    CHECK(c->student_mlb.use_ema);
    CHECK(c->student_mlb.use_weak_strong);
    CHECK_FALSE(c->teacher_finetune.use_ema);
  }

  CHECK_THROWS_AS(profile_defaults("huge"), std::invalid_argument);
}

TEST_CASE("empty document parses to the toy profile") {
  CHECK(experiment_config_from_json(json::object()) == toy_defaults());
}

TEST_CASE("serialize then parse is the identity") {
  ExperimentConfig c = paper_defaults();
  c.seed = 99;
  c.seg_n = 256;
  c.mat_n = 64;
  c.data.seg_dir = "/data/seg";
  c.data.matte_fg_dir = "/data/mattes";
  c.data.backgrounds_dir = "/data/bg";
  c.data.eval_sets = {{"natural", "/data/eval_nat"}, {"studio", "/data/eval_studio"}};
  c.network.width_multiplier = 0.5;
  c.student_mlb.ema_momentum = 0.995;
  c.student_mlb.use_weak_strong = false;
  c.loss.grad_op = GradOperator::sobel;
  c.loss.lambda_boundary = 0.02;
  c.augment.hue = 0.2;
  c.eval.shorter_edge = 256;
  c.output_dir = "runs/rt";

  const ExperimentConfig back = experiment_config_from_json(json(c));
  CHECK(back == c);

  const ExperimentConfig toy_back = experiment_config_from_json(json(toy_defaults()));
  CHECK(toy_back == toy_defaults());
}

TEST_CASE("unknown keys are rejected with their full path") {
  auto expect_unknown = [](const json& doc, const std::string& path) {
    CHECK_THROWS_WITH(experiment_config_from_json(doc),
                      Catch::Matchers::ContainsSubstring("unknown key '" + path + "'"));
  };
  expect_unknown({{"lerning_rate", 1}}, "lerning_rate");
  expect_unknown({{"network", {{"depth", 4}}}}, "network.depth");
  expect_unknown({{"stages", {{"student_mlb", {{"moemntum", 0.9}}}}}},
                 "stages.student_mlb.moemntum");
  expect_unknown({{"stages", {{"warmup", json::object()}}}}, "stages.warmup");
  expect_unknown({{"augment", {{"blur", 1.0}}}}, "augment.blur");
  expect_unknown({{"data", {{"cache", "/tmp"}}}}, "data.cache");
  expect_unknown({{"eval", {{"long_edge", 512}}}}, "eval.long_edge");
  expect_unknown({{"loss", {{"lambda", 0.1}}}}, "loss.lambda");
}

TEST_CASE("explicit keys override the profile bundle key by key") {
  const json doc{{"profile", "paper"},
                 {"seed", 7},
                 {"stages", {{"student_mlb", {{"lr", 1e-3}}}}},
                 {"network", {{"width_multiplier", 0.5}}}};
  const ExperimentConfig c = experiment_config_from_json(doc);
  CHECK(c.seed == 7);
  CHECK(c.student_mlb.lr == Catch::Approx(1e-3));
  CHECK(c.student_mlb.iterations == 20000);       // untouched profile default
  CHECK(c.seg_pretrain.iterations == 200000);     // untouched sibling stage
  CHECK(c.network.width_multiplier == Catch::Approx(0.5));
  CHECK(c.network.preset == EncoderPreset::large);  // merge kept the preset
}

TEST_CASE("stage fields are range checked") {
  auto doc_with = [](const char* key, json value) {
    return json{{"stages", {{"seg_pretrain", {{key, std::move(value)}}}}}};
  };
  CHECK_THROWS_AS(experiment_config_from_json(doc_with("iterations", -1)), std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(doc_with("batch_size", 0)), std::invalid_argument);
  CHECK_THROWS_AS(experiment_config_from_json(doc_with("ema_momentum", 1.0)),
                  std::invalid_argument);
  CHECK_NOTHROW(experiment_config_from_json(doc_with("iterations", 0)));
}

TEST_CASE("grad_op names map to operators") {
  CHECK(experiment_config_from_json({{"loss", {{"grad_op", "sobel"}}}}).loss.grad_op ==
        GradOperator::sobel);
  CHECK(experiment_config_from_json({{"loss", {{"grad_op", "forward_diff"}}}}).loss.grad_op ==
        GradOperator::forward_diff);
  CHECK_THROWS_AS(experiment_config_from_json({{"loss", {{"grad_op", "laplacian"}}}}),
                  std::invalid_argument);
}

TEST_CASE("dotted overrides patch the raw document") {
  json j = json::object();
  apply_override(j, "seed=7");
  apply_override(j, "stages.student_mlb.use_ema=false");
  apply_override(j, "network.width_multiplier=0.5");
  apply_override(j, "output_dir=runs/x");  // not valid JSON, kept as a string

  CHECK(j["seed"] == 7);
  CHECK(j["seed"].is_number_integer());
  CHECK(j["stages"]["student_mlb"]["use_ema"] == false);
  CHECK(j["network"]["width_multiplier"] == 0.5);
  CHECK(j["output_dir"] == "runs/x");

  const ExperimentConfig c = experiment_config_from_json(j);
  CHECK(c.seed == 7);
  CHECK_FALSE(c.student_mlb.use_ema);

  CHECK_THROWS_AS(apply_override(j, "no_equals_sign"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(j, "=5"), std::invalid_argument);
  CHECK_THROWS_AS(apply_override(j, "a..b=1"), std::invalid_argument);
}

TEST_CASE("config files round trip on disk") {
  ExperimentConfig c = toy_defaults();
  c.seed = 42;
  c.data.seg_dir = "data/toy/seg";
  c.output_dir = "runs/disk";
  const std::string path = temp_path("matteblend_config_rt.json");
  save_config_file(path, c);
  CHECK(load_config_file(path) == c);
  std::remove(path.c_str());

  CHECK_THROWS_WITH(load_config_file(temp_path("matteblend_missing.json")),
                    Catch::Matchers::ContainsSubstring("matteblend_missing.json"));

  const std::string bad = temp_path("matteblend_config_bad.json");
  {
    std::ofstream out(bad);
    out << "{ not json";
  }
  CHECK_THROWS_WITH(load_config_file(bad), Catch::Matchers::ContainsSubstring(bad));
  std::remove(bad.c_str());
}

TEST_CASE("training validation catches cross-field mistakes") {
  ExperimentConfig c = toy_defaults();
  c.data.seg_dir = "x";
  CHECK_NOTHROW(validate_for_training(c));

  ExperimentConfig no_data = c;
  no_data.seg_n = 0;
  no_data.mat_n = 0;
  CHECK_THROWS_WITH(validate_for_training(no_data),
                    Catch::Matchers::ContainsSubstring("seg_n and mat_n are both 0"));

  ExperimentConfig bad_crop = c;
  bad_crop.augment.crop_min = 100;
  bad_crop.augment.crop_max = 64;
  CHECK_THROWS_AS(validate_for_training(bad_crop), std::invalid_argument);

  ExperimentConfig no_out = c;
  no_out.output_dir = "";
  CHECK_THROWS_AS(validate_for_training(no_out), std::invalid_argument);

  // The degenerate single-source corners stay valid configurations.
  ExperimentConfig seg_only = c;
  seg_only.mat_n = 0;
  CHECK_NOTHROW(validate_for_training(seg_only));
  ExperimentConfig mat_only = c;
  mat_only.seg_n = 0;
  CHECK_NOTHROW(validate_for_training(mat_only));
}
