#include <catch2/catch_amalgamated.hpp>

#include "matteblend/data/toyworld.hpp"
#include "matteblend/train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

using namespace matteblend;
namespace fs = std::filesystem;

namespace {

constexpr int kSize = 40;

NetworkConfig tiny_config() {
  NetworkConfig cfg;
  cfg.preset = EncoderPreset::small;
  cfg.width_multiplier = 0.125;
  return cfg;
}

AugmentConfig tiny_augment() {
  AugmentConfig aug;
  aug.crop_min = 32;
  aug.crop_max = 32;
  return aug;
}

StageConfig tiny_stage(int iterations, bool use_ema, double momentum = 0.9) {
  StageConfig cfg;
  cfg.lr = 1e-3;
  cfg.iterations = iterations;
  cfg.batch_size = 2;
  cfg.ema_momentum = momentum;
  cfg.use_ema = use_ema;
  cfg.use_weak_strong = true;
  return cfg;
}

// A bright soft-edged disc on a noisy ground, with the mask thresholded from
// the same disc, so brightness genuinely predicts the label.
SegSample make_seg_sample(std::uint64_t seed) {
  Rng rng(seed);
  const double cy = rng.uniform(0.35, 0.65) * kSize;
  const double cx = rng.uniform(0.35, 0.65) * kSize;
  const double r = rng.uniform(0.2, 0.3) * kSize;
  RgbImage<float> img(kSize, kSize);
  SegMask mask(kSize, kSize, 0);
  for (int y = 0; y < kSize; ++y)
    for (int x = 0; x < kSize; ++x) {
      const double d = std::hypot(y - cy, x - cx);
      const double a = std::clamp((r - d) / 2.0 + 0.5, 0.0, 1.0);
      mask.at(y, x) = a > 0.5 ? 1 : 0;
      for (int c = 0; c < 3; ++c)
        img.at(c, y, x) =
            static_cast<float>(std::clamp(0.2 + 0.6 * a + 0.1 * rng.uniform01(), 0.0, 1.0));
    }
  return {std::move(img), std::move(mask), "seg" + std::to_string(seed)};
}

MatteSample make_matte_sample(std::uint64_t seed) {
  Rng rng(seed);
  const double cy = rng.uniform(0.35, 0.65) * kSize;
  const double cx = rng.uniform(0.35, 0.65) * kSize;
  const double r = rng.uniform(0.2, 0.3) * kSize;
  RgbImage<float> fg(kSize, kSize);
  PixelGrid<float> alpha(kSize, kSize);
  const float col[3] = {static_cast<float>(rng.uniform(0.4, 0.9)),
                        static_cast<float>(rng.uniform(0.4, 0.9)),
                        static_cast<float>(rng.uniform(0.4, 0.9))};
  for (int y = 0; y < kSize; ++y)
    for (int x = 0; x < kSize; ++x) {
      const double d = std::hypot(y - cy, x - cx);
      alpha.at(y, x) = static_cast<float>(std::clamp((r - d) / 3.0 + 0.5, 0.0, 1.0));
      for (int c = 0; c < 3; ++c) fg.at(c, y, x) = col[c];
    }
  return {std::move(fg), AlphaMatte<float>(std::move(alpha)), "mat" + std::to_string(seed)};
}

std::vector<SegSample> seg_dataset(int n) {
  std::vector<SegSample> out;
  for (int i = 0; i < n; ++i) out.push_back(make_seg_sample(100 + i));
  return out;
}

std::vector<const SegSample*> all_ptrs(const std::vector<SegSample>& data) {
  std::vector<const SegSample*> out;
  for (const auto& s : data) out.push_back(&s);
  return out;
}

template <typename T>
std::vector<std::vector<T>> snapshot(const MattingNetwork<T>& net) {
  std::vector<std::vector<T>> out;
  for (const Param<T>* p : net.parameters()) out.push_back(p->value);
  return out;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

const ToyWorldPaths& shared_world() {
  static const ToyWorldPaths paths = [] {
    const fs::path root = fs::temp_directory_path() / "matteblend_trainer_world";
    fs::remove_all(root);
    ToyConfig cfg;
    cfg.n_matte = 4;
    cfg.n_seg = 6;
    cfg.n_eval = 2;
    cfg.n_backgrounds = 4;
    cfg.image_size = 96;
    cfg.seed = 7;
    return generate_toy_world(root.string(), cfg);
  }();
  return paths;
}

}  // namespace

TEST_CASE("seg batches pair weak and strong views over one geometry") {
  const std::vector<SegSample> data = seg_dataset(3);
  const Rng step_rng = Rng(123).stream(0);

  const SegBatch<float> plain = make_seg_batch<float>(all_ptrs(data), tiny_augment(), step_rng,
                                                      /*photo_jitter=*/false);
  CHECK(plain.weak.n() == 3);
  CHECK(plain.weak.c() == 3);
  CHECK(plain.weak.h() == 32);
  CHECK(plain.weak.w() == 32);
  CHECK(plain.seg.c() == 1);
  CHECK(bitwise_equal(plain.strong, plain.weak));
  for (std::size_t i = 0; i < plain.seg.size(); ++i)
    CHECK((plain.seg.data()[i] == 0.0f || plain.seg.data()[i] == 1.0f));

  const SegBatch<float> jittered = make_seg_batch<float>(all_ptrs(data), tiny_augment(), step_rng,
                                                         /*photo_jitter=*/true);
  // Geometry draws precede photometric draws per slot, so the weak view and
  // the mask are unchanged by turning jitter on.
  CHECK(bitwise_equal(jittered.weak, plain.weak));
  CHECK(bitwise_equal(jittered.seg, plain.seg));
  CHECK_FALSE(bitwise_equal(jittered.strong, jittered.weak));

  const SegBatch<float> replay = make_seg_batch<float>(all_ptrs(data), tiny_augment(), step_rng,
                                                       /*photo_jitter=*/true);
  CHECK(bitwise_equal(replay.strong, jittered.strong));

  CHECK_THROWS_AS(make_seg_batch<float>({}, tiny_augment(), step_rng, false),
                  std::invalid_argument);
}

TEST_CASE("matte batches re-derive boundary targets after geometry") {
  std::vector<MatteSample> data;
  data.push_back(make_matte_sample(1));
  data.push_back(make_matte_sample(2));
  std::vector<const MatteSample*> ptrs{&data[0], &data[1]};
  std::vector<RgbImage<float>> bgs{RgbImage<float>(48, 48, 0.3f), RgbImage<float>(48, 48, 0.8f)};

  const Rng step_rng = Rng(9).stream(0);
  const MatteBatch<float> b = make_matte_batch<float>(ptrs, bgs, 5, 0, tiny_augment(), step_rng);
  CHECK(b.images.n() == 2);
  CHECK(b.images.c() == 3);
  CHECK(b.matte.c() == 1);
  CHECK(b.matte.h() == 32);

  // The boundary channel must be exactly the band of the transformed matte,
  // not a band computed before resampling.
  CHECK(bitwise_equal(b.boundary, extract_boundary_batch(b.matte)));
  bool band_nonempty = false;
  for (std::size_t i = 0; i < b.boundary.size(); ++i) band_nonempty |= b.boundary.data()[i] > 0;
  CHECK(band_nonempty);

  const MatteBatch<float> replay =
      make_matte_batch<float>(ptrs, bgs, 5, 0, tiny_augment(), step_rng);
  CHECK(bitwise_equal(replay.images, b.images));
  CHECK(bitwise_equal(replay.matte, b.matte));

  // A different background seed pairs different backgrounds.
  const MatteBatch<float> other = make_matte_batch<float>(ptrs, bgs, 6, 0, tiny_augment(), step_rng);
  CHECK_FALSE(bitwise_equal(other.images, b.images));
}

TEST_CASE("pseudo labels are deterministic and binary at the boundary head") {
  MattingNetwork<float> net(tiny_config(), 3);
  const std::vector<SegSample> data = seg_dataset(2);
  const SegBatch<float> b =
      make_seg_batch<float>(all_ptrs(data), tiny_augment(), Rng(4).stream(0), false);

  auto [matte, alpha] = generate_pseudo_labels(net, b.weak);
  CHECK(matte.n() == 2);
  CHECK(matte.c() == 1);
  CHECK(matte.h() == 32);
  for (std::size_t i = 0; i < matte.size(); ++i) {
    CHECK(matte.data()[i] >= 0.0f);
    CHECK(matte.data()[i] <= 1.0f);
    CHECK((alpha.data()[i] == 0.0f || alpha.data()[i] == 1.0f));
  }

  auto [matte2, alpha2] = generate_pseudo_labels(net, b.weak);
  CHECK(bitwise_equal(matte2, matte));
  CHECK(bitwise_equal(alpha2, alpha));
}

TEST_CASE("the teacher is bitwise frozen when ema is off") {
  const std::vector<SegSample> data = seg_dataset(4);
  MattingNetwork<float> teacher(tiny_config(), 11);
  MattingNetwork<float> student(tiny_config(), 12);

  StudentState<float> st =
      make_student_state<float>(std::move(student), MattingNetwork<float>(teacher),
                         tiny_stage(3, /*use_ema=*/false), tiny_augment(), LossConfig{}, 55);
  const auto teacher_before = snapshot(*st.teacher);
  const auto student_before = snapshot(st.student);

  for (int i = 0; i < 3; ++i) {
    std::vector<const SegSample*> batch{&data[i % data.size()], &data[(i + 1) % data.size()]};
    const LossBreakdown lb = student_step(st, batch);
    CHECK(std::isfinite(lb.total));
    CHECK(lb.boundary == 0.0);  // the student stage trains the matte head only
    CHECK(lb.total == Catch::Approx(lb.mse + lb.grad));
  }

  CHECK(snapshot(*st.teacher) == teacher_before);
  CHECK(snapshot(st.student) != student_before);
  CHECK(st.step == 3);
}

TEST_CASE("ema follows its closed form over three steps") {
  const std::vector<SegSample> data = seg_dataset(4);
  const double m = 0.9;
  MattingNetwork<double> teacher(tiny_config(), 11);
  MattingNetwork<double> student(tiny_config(), 12);

  StudentState<double> st =
      make_student_state<double>(std::move(student), MattingNetwork<double>(teacher),
                         tiny_stage(3, /*use_ema=*/true, m), tiny_augment(), LossConfig{}, 55);

  const auto theta0 = snapshot(*st.teacher);
  std::vector<std::vector<std::vector<double>>> s;  // student after each step
  for (int i = 0; i < 3; ++i) {
    std::vector<const SegSample*> batch{&data[i], &data[i + 1]};
    student_step(st, batch);
    s.push_back(snapshot(st.student));
  }

  // theta_3 = m^3 theta_0 + (1-m) (m^2 s_1 + m s_2 + s_3)
  const auto theta3 = snapshot(*st.teacher);
  double worst = 0.0;
  for (std::size_t p = 0; p < theta0.size(); ++p)
    for (std::size_t i = 0; i < theta0[p].size(); ++i) {
      const double expect = m * m * m * theta0[p][i] +
                            (1.0 - m) * (m * m * s[0][p][i] + m * s[1][p][i] + s[2][p][i]);
      worst = std::max(worst, std::abs(theta3[p][i] - expect));
    }
  CHECK(worst < 1e-10);
}

TEST_CASE("ema preconditions are configuration errors") {
  CHECK_THROWS_WITH(
      make_student_state<float>(MattingNetwork<float>(tiny_config(), 1), std::nullopt,
                         tiny_stage(1, true), tiny_augment(), LossConfig{}, 1),
      Catch::Matchers::ContainsSubstring("requires a teacher"));

  NetworkConfig wider = tiny_config();
  wider.width_multiplier = 0.25;
  CHECK_THROWS_WITH(
      make_student_state<float>(MattingNetwork<float>(tiny_config(), 1),
                         MattingNetwork<float>(wider, 2), tiny_stage(1, true), tiny_augment(),
                         LossConfig{}, 1),
      Catch::Matchers::ContainsSubstring("identical"));

  CHECK_NOTHROW(make_student_state<float>(MattingNetwork<float>(tiny_config(), 1), std::nullopt,
                                   tiny_stage(1, false), tiny_augment(), LossConfig{}, 1));
}

TEST_CASE("without a teacher the student trains on the raw masks") {
  const std::vector<SegSample> data = seg_dataset(2);
  StudentState<float> st =
      make_student_state<float>(MattingNetwork<float>(tiny_config(), 8), std::nullopt,
                         tiny_stage(1, false), tiny_augment(), LossConfig{}, 19);
  const LossBreakdown lb = student_step(st, all_ptrs(data));
  CHECK(std::isfinite(lb.total));
  CHECK(lb.total > 0.0);
  CHECK(st.step == 1);
}

TEST_CASE("zero-iteration stages leave parameters untouched") {
  const std::vector<SegSample> data = seg_dataset(2);
  MattingNetwork<float> net(tiny_config(), 31);
  const auto before = snapshot(net);

  pretrain_seg(net, data, tiny_stage(0, false), tiny_augment(), 5);
  CHECK(snapshot(net) == before);

  StudentState<float> st = make_student_state<float>(std::move(net), std::nullopt, tiny_stage(0, false),
                                              tiny_augment(), LossConfig{}, 5);
  run_student_stage(st, data);
  CHECK(snapshot(st.student) == before);
}

TEST_CASE("stages replay bitwise under a fixed seed") {
  const std::vector<SegSample> data = seg_dataset(3);
  auto run_once = [&] {
    MattingNetwork<float> net(tiny_config(), 21);
    pretrain_seg(net, data, tiny_stage(2, false), tiny_augment(), 77);
    return snapshot(net);
  };
  CHECK(run_once() == run_once());
}

TEST_CASE("pretraining logs jsonl records and the loss trends down") {
  const std::vector<SegSample> data = seg_dataset(4);
  const std::string log_path =
      (fs::temp_directory_path() / "matteblend_trainer_log.jsonl").string();
  {
    MattingNetwork<float> net(tiny_config(), 41);
    StageConfig cfg = tiny_stage(40, false);
    cfg.lr = 2e-3;
    TrainLog log(log_path);
    pretrain_seg(net, data, cfg, tiny_augment(), 13, &log);
  }

  std::ifstream in(log_path);
  REQUIRE(in.good());
  std::vector<double> totals;
  std::string line;
  std::uint64_t expect_step = 0;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j.at("stage") == "seg_pretrain");
    CHECK(j.at("step") == expect_step++);
    CHECK(j.at("lr").get<double>() > 0.0);
    totals.push_back(j.at("total").get<double>());
    CHECK(std::isfinite(totals.back()));
  }
  REQUIRE(totals.size() == 40);
  const double first = std::accumulate(totals.begin(), totals.begin() + 10, 0.0) / 10.0;
  const double last = std::accumulate(totals.end() - 10, totals.end(), 0.0) / 10.0;
  CHECK(last < first);
  fs::remove(log_path);
}

TEST_CASE("non-finite losses abort with stage context") {
  const std::vector<SegSample> data = seg_dataset(2);
  StudentState<float> st =
      make_student_state<float>(MattingNetwork<float>(tiny_config(), 3), std::nullopt,
                         tiny_stage(1, false), tiny_augment(), LossConfig{}, 7);
  st.student.parameters()[0]->value[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_WITH(student_step(st, all_ptrs(data)),
                    Catch::Matchers::ContainsSubstring("non-finite") &&
                        Catch::Matchers::ContainsSubstring("student_mlb"));
}

namespace {

ExperimentConfig pipeline_config(const std::string& out_dir) {
  const ToyWorldPaths& world = shared_world();
  ExperimentConfig cfg = toy_defaults();
  cfg.seed = 3;
  cfg.network.width_multiplier = 0.125;
  cfg.data.seg_dir = world.seg;
  cfg.data.matte_fg_dir = world.matte_fg;
  cfg.data.backgrounds_dir = world.backgrounds;
  cfg.data.eval_sets = {{"natural", world.eval_natural}};
  cfg.seg_pretrain = {1e-3, 2, 2, 0.999, false, false};
  cfg.teacher_finetune = {2e-4, 2, 2, 0.999, false, false};
  cfg.student_mlb = {2e-4, 2, 2, 0.9, true, true};
  cfg.augment.crop_min = 48;
  cfg.augment.crop_max = 64;
  cfg.eval.shorter_edge = 64;
  cfg.output_dir = (fs::temp_directory_path() / out_dir).string();
  fs::remove_all(cfg.output_dir);
  return cfg;
}

}  // namespace

TEST_CASE("the pipeline writes its artifact tree") {
  const ExperimentConfig cfg = pipeline_config("matteblend_pipe_full");
  const PipelineArtifacts art = run_pipeline(cfg);

  CHECK(art.final_stage == Stage::student_mlb);
  CHECK(fs::exists(cfg.output_dir + "/config.json"));
  CHECK(fs::exists(cfg.output_dir + "/train_log.jsonl"));
  CHECK(fs::exists(cfg.output_dir + "/seg_pretrain_2.ckpt"));
  CHECK(fs::exists(cfg.output_dir + "/teacher_finetune_2.ckpt"));
  CHECK(fs::exists(cfg.output_dir + "/student_mlb_2.ckpt"));
  CHECK(fs::exists(cfg.output_dir + "/final.ckpt"));
  CHECK(fs::exists(cfg.output_dir + "/report.json"));
  CHECK(fs::exists(cfg.output_dir + "/reports/natural.json"));

  REQUIRE(art.reports.count("natural") == 1);
  const MetricReport& r = art.reports.at("natural");
  CHECK(r.n_images == 2);
  CHECK(r.n_unreadable == 0);
  CHECK(std::isfinite(r.mse_whole));

  // The saved config file reproduces the experiment verbatim.
  CHECK(load_config_file(cfg.output_dir + "/config.json") == cfg);

  // The final checkpoint restores into a usable network.
  auto [net, step] = network_from_checkpoint<float>(cfg.output_dir + "/final.ckpt");
  CHECK(net.config() == cfg.network);
}

TEST_CASE("dropping all matte data trains the student on raw masks") {
  ExperimentConfig cfg = pipeline_config("matteblend_pipe_noteacher");
  cfg.mat_n = 0;
  const PipelineArtifacts art = run_pipeline(cfg);
  CHECK(art.final_stage == Stage::student_mlb);
  CHECK_FALSE(fs::exists(cfg.output_dir + "/teacher_finetune_2.ckpt"));
  CHECK(fs::exists(cfg.output_dir + "/student_mlb_2.ckpt"));
  CHECK(fs::exists(cfg.output_dir + "/final.ckpt"));
}

TEST_CASE("dropping all seg data promotes the teacher to the final network") {
  ExperimentConfig cfg = pipeline_config("matteblend_pipe_nostudent");
  cfg.seg_n = 0;
  const PipelineArtifacts art = run_pipeline(cfg);
  CHECK(art.final_stage == Stage::teacher_finetune);
  CHECK_FALSE(fs::exists(cfg.output_dir + "/seg_pretrain_2.ckpt"));
  CHECK_FALSE(fs::exists(cfg.output_dir + "/student_mlb_2.ckpt"));
  CHECK(fs::exists(cfg.output_dir + "/teacher_finetune_2.ckpt"));
  CHECK(fs::exists(cfg.output_dir + "/final.ckpt"));
}

TEST_CASE("two pipeline runs from one seed produce identical weights") {
  const ExperimentConfig a = pipeline_config("matteblend_pipe_rep_a");
  run_pipeline(a);
  ExperimentConfig b = pipeline_config("matteblend_pipe_rep_b");
  const std::string b_dir = b.output_dir;
  run_pipeline(b);

  auto read_all = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  // The checkpoint header embeds only the architecture, which both runs
  // share, so the whole file must match byte for byte.
  CHECK(read_all(a.output_dir + "/final.ckpt") == read_all(b_dir + "/final.ckpt"));
}

TEST_CASE("manifest evaluation follows the shorter-edge protocol") {
  const ToyWorldPaths& world = shared_world();
  MattingNetwork<float> net(tiny_config(), 5);
  const DatasetManifest manifest = load_manifest(world.eval_matte, LabelKind::matte_fg);
  EvalProtocol protocol;
  protocol.shorter_edge = 64;

  const MetricReport r = evaluate_manifest(net, "toy_eval", manifest, protocol);
  CHECK(r.dataset_id == "toy_eval");
  CHECK(r.n_images == 2);
  CHECK(r.per_image.size() == 2);
  CHECK(std::isfinite(r.mse_whole));
  CHECK(std::isfinite(r.sad_whole));

  const MetricReport again = evaluate_manifest(net, "toy_eval", manifest, protocol);
  CHECK(nlohmann::json(r) == nlohmann::json(again));
}
