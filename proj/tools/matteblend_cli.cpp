// Command-line front end: dataset generation, composition preview, training
// (full pipeline or a single stage), grid sweeps with resume, evaluation,
// throughput benchmarking and chart emission.

#include <CLI11.hpp>

#include "matteblend/config.hpp"
#include "matteblend/data/toyworld.hpp"
#include "matteblend/report/bench.hpp"
#include "matteblend/report/plot.hpp"
#include "matteblend/train/trainer.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace matteblend;

namespace {

// Options shared by every experiment-driven subcommand.
struct CommonOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config_path, "experiment config file (JSON)");
  sub->add_option("--set", o.overrides, "override as dotted.path=value, repeatable")
      ->delimiter(0);
  sub->add_option("--seed", o.seed, "override the experiment seed")
      ->each([&o](const std::string&) { o.seed_given = true; });
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("config file " + path + ": " + e.what());
  }
}

/// MATTEBLEND_OUTPUT_ROOT prefixes relative output locations so batch runs
/// can redirect every artifact without touching configs.
std::string under_output_root(const std::string& dir) {
  const char* root = std::getenv("MATTEBLEND_OUTPUT_ROOT");
  if (root && *root && !dir.empty() && !fs::path(dir).is_absolute())
    return (fs::path(root) / dir).string();
  return dir;
}

ExperimentConfig load_experiment(const CommonOpts& o) {
  nlohmann::json j = o.config_path.empty() ? nlohmann::json::object() : load_json_file(o.config_path);
  for (const std::string& s : o.overrides) apply_override(j, s);
  ExperimentConfig cfg = experiment_config_from_json(j);
  if (o.seed_given) cfg.seed = o.seed;
  cfg.output_dir = under_output_root(cfg.output_dir);
  return cfg;
}

std::string metric_line(const std::string& name, const MetricReport& r) {
  char buf[256];
  auto opt = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("-");
  };
  std::snprintf(buf, sizeof(buf),
                "%s: mse_whole=%.6g sad_whole=%.6g mse_boundary=%s sad_boundary=%s "
                "(n=%d, boundary_skipped=%d)",
                name.c_str(), r.mse_whole, r.sad_whole, opt(r.mse_boundary).c_str(),
                opt(r.sad_boundary).c_str(), r.n_images, r.n_boundary_skipped);
  return buf;
}

// ---- make-toy-data -----------------------------------------------------------

struct MakeDataOpts {
  std::string out = "data/toy";
  ToyConfig cfg;
};

int cmd_make_toy_data(const MakeDataOpts& o) {
  const std::string out = under_output_root(o.out);
  const ToyWorldPaths paths = generate_toy_world(out, o.cfg);
  std::printf("matte_fg:     %s (%d samples)\n", paths.matte_fg.c_str(), o.cfg.n_matte);
  std::printf("backgrounds:  %s (%d images)\n", paths.backgrounds.c_str(), o.cfg.n_backgrounds);
  std::printf("seg:          %s (%d samples)\n", paths.seg.c_str(), o.cfg.n_seg);
  std::printf("eval_matte:   %s (%d samples)\n", paths.eval_matte.c_str(), o.cfg.n_eval);
  std::printf("eval_natural: %s (%d samples)\n", paths.eval_natural.c_str(), o.cfg.n_eval);
  return 0;
}

// ---- compose -----------------------------------------------------------------

struct ComposeOpts {
  CommonOpts common;
  std::string out;
  int count = 4;
  std::uint64_t start_index = 0;
};

int cmd_compose(const ComposeOpts& o) {
  const ExperimentConfig cfg = load_experiment(o.common);
  const DatasetManifest manifest = load_manifest(cfg.data.matte_fg_dir, LabelKind::matte_fg);
  const std::vector<RgbImage<float>> backgrounds =
      load_background_pool(cfg.data.backgrounds_dir);
  const std::string out = under_output_root(o.out);
  fs::create_directories(out);

  for (int i = 0; i < o.count; ++i) {
    const ManifestEntry& entry = manifest.entries[i % manifest.entries.size()];
    const MatteSample sample = load_matte_sample(entry);
    auto [image, matte] =
        compose_matte_sample(sample, backgrounds, cfg.seed, o.start_index + i);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "%04d", i);
    write_rgb_image(out + "/composite_" + stem + ".png", image);
    write_alpha_matte(out + "/matte_" + stem + ".png", matte);
  }
  std::printf("wrote %d composite/matte pairs to %s\n", o.count, out.c_str());
  return 0;
}

// ---- train -------------------------------------------------------------------

struct TrainOpts {
  CommonOpts common;
  std::string stage = "all";
  std::string init_ckpt;
  std::string teacher_ckpt;
};

MattingNetwork<float> initial_network(const ExperimentConfig& cfg, const std::string& init_ckpt) {
  if (init_ckpt.empty())
    return MattingNetwork<float>(cfg.network, mix_seed(cfg.seed, hash_string("network_init")));
  auto [net, step] = network_from_checkpoint<float>(init_ckpt);
  if (!(net.config() == cfg.network))
    std::fprintf(stderr, "note: using the architecture stored in %s\n", init_ckpt.c_str());
  return std::move(net);
}

int cmd_train(const TrainOpts& o) {
  const ExperimentConfig cfg = load_experiment(o.common);

  if (o.stage == "all") {
    std::printf("training pipeline: profile=%s seed=%llu seg_n=%d mat_n=%d -> %s\n",
                cfg.profile.c_str(), static_cast<unsigned long long>(cfg.seed), cfg.seg_n,
                cfg.mat_n, cfg.output_dir.c_str());
    const PipelineArtifacts art = run_pipeline(cfg);
    std::printf("final stage: %s\n", to_string(art.final_stage));
    std::printf("final checkpoint: %s\n", art.final_checkpoint.c_str());
    for (const auto& [name, report] : art.reports)
      std::printf("%s\n", metric_line(name, report).c_str());
    return 0;
  }

  const Stage stage = stage_from_string(o.stage);
  validate_for_training(cfg);
  fs::create_directories(cfg.output_dir);
  TrainLog log(cfg.output_dir + "/train_log.jsonl");
  const std::uint64_t stage_seed = mix_seed(cfg.seed, hash_string(to_string(stage)));
  MattingNetwork<float> net = initial_network(cfg, o.init_ckpt);

  int iterations = 0;
  switch (stage) {
    case Stage::seg_pretrain: {
      const std::vector<SegSample> data = load_seg_samples(
          manifest_subset(cfg.data.seg_dir, LabelKind::seg, cfg.seg_n, cfg.seed));
      pretrain_seg(net, data, cfg.seg_pretrain, cfg.augment, stage_seed, &log);
      iterations = cfg.seg_pretrain.iterations;
      break;
    }
    case Stage::teacher_finetune: {
      const std::vector<MatteSample> data = load_matte_samples(
          manifest_subset(cfg.data.matte_fg_dir, LabelKind::matte_fg, cfg.mat_n, cfg.seed));
      const std::vector<RgbImage<float>> backgrounds =
          load_background_pool(cfg.data.backgrounds_dir);
      train_teacher(net, data, backgrounds, cfg.teacher_finetune, cfg.augment, cfg.loss,
                    stage_seed, &log);
      iterations = cfg.teacher_finetune.iterations;
      break;
    }
    case Stage::student_mlb: {
      const std::vector<SegSample> data = load_seg_samples(
          manifest_subset(cfg.data.seg_dir, LabelKind::seg, cfg.seg_n, cfg.seed));
      std::optional<MattingNetwork<float>> teacher;
      if (!o.teacher_ckpt.empty())
        teacher.emplace(network_from_checkpoint<float>(o.teacher_ckpt).first);
      StudentState<float> st =
          make_student_state(std::move(net), std::move(teacher), cfg.student_mlb, cfg.augment,
                             cfg.loss, stage_seed);
      run_student_stage(st, data, &log);
      net = std::move(st.student);
      iterations = cfg.student_mlb.iterations;
      break;
    }
  }

  const std::string ckpt = cfg.output_dir + "/" + std::string(to_string(stage)) + "_" +
                           std::to_string(iterations) + ".ckpt";
  save_checkpoint(ckpt, net, iterations);
  std::printf("stage %s finished; checkpoint: %s\n", to_string(stage), ckpt.c_str());
  return 0;
}

// ---- evaluate ----------------------------------------------------------------

struct EvaluateOpts {
  CommonOpts common;
  std::string checkpoint;
  std::vector<std::string> only_sets;
};

int cmd_evaluate(const EvaluateOpts& o) {
  const ExperimentConfig cfg = load_experiment(o.common);
  if (cfg.data.eval_sets.empty())
    throw std::runtime_error("config defines no eval sets (data.eval_sets)");
  for (const std::string& name : o.only_sets)
    if (!cfg.data.eval_sets.count(name))
      throw std::runtime_error("unknown eval set '" + name + "'");

  auto [net, step] = network_from_checkpoint<float>(o.checkpoint);
  fs::create_directories(cfg.output_dir + "/reports");
  for (const auto& [name, dir] : cfg.data.eval_sets) {
    if (!o.only_sets.empty() &&
        std::find(o.only_sets.begin(), o.only_sets.end(), name) == o.only_sets.end())
      continue;
    const MetricReport report =
        evaluate_manifest(net, name, load_manifest(dir, LabelKind::matte_fg), cfg.eval);
    std::ofstream out(cfg.output_dir + "/reports/" + name + ".json");
    out << nlohmann::json(report).dump(2) << "\n";
    std::printf("%s\n", metric_line(name, report).c_str());
  }
  return 0;
}

// ---- benchmark ---------------------------------------------------------------

struct BenchmarkOpts {
  CommonOpts common;
  std::string checkpoint;
  int edge = 512;
  int iters = 10;
  int warmup = 3;
  std::string hardware = "unspecified-host";
};

int cmd_benchmark(const BenchmarkOpts& o) {
  const ExperimentConfig cfg = load_experiment(o.common);
  auto [net, step] = network_from_checkpoint<float>(o.checkpoint);
  const BenchResult r = run_benchmark(net, o.edge, o.iters, o.warmup, cfg.seed);
  std::printf("hardware: %s\n", o.hardware.c_str());
  std::printf("input: 3x%dx%d, warmup %d (excluded), timed %d\n", r.edge, r.edge, r.n_warmup,
              r.n_timed);
  std::printf("latency: mean %.3f ms, p50 %.3f ms, p90 %.3f ms\n", r.mean_ms, r.p50_ms, r.p90_ms);
  std::printf("throughput: %.3f images/sec\n", r.images_per_sec);
  return 0;
}

// ---- sweep -------------------------------------------------------------------

struct SweepOpts {
  CommonOpts common;
  std::vector<int> seg_counts;
  std::vector<int> mat_counts;
  int jobs = 1;
};

struct SweepCellResult {
  bool failed = false;
  bool resumed = false;
  std::vector<SweepRow> rows;
  std::string message;
};

SweepCellResult run_sweep_cell(const ExperimentConfig& base, int seg_n, int mat_n) {
  SweepCellResult res;
  ExperimentConfig cfg = base;
  cfg.seg_n = seg_n;
  cfg.mat_n = mat_n;
  cfg.output_dir =
      base.output_dir + "/seg" + std::to_string(seg_n) + "_mat" + std::to_string(mat_n);
  const std::string report_path = cfg.output_dir + "/report.json";

  try {
    if (fs::exists(report_path)) {
      res.resumed = true;
    } else {
      run_pipeline(cfg);
    }
    const nlohmann::json j = load_json_file(report_path);
    if (j.contains("reports"))
      for (const auto& [name, jr] : j.at("reports").items()) {
        const MetricReport r = jr.get<MetricReport>();
        res.rows.push_back({seg_n, mat_n, name, r.mse_whole, r.sad_whole, r.mse_boundary,
                            r.sad_boundary, r.n_images, r.n_boundary_skipped});
      }
    res.message = res.resumed ? "resumed" : "trained";
  } catch (const std::exception& e) {
    res.failed = true;
    res.message = std::string("failed: ") + e.what();
  }
  return res;
}

int cmd_sweep(const SweepOpts& o) {
  const ExperimentConfig base = load_experiment(o.common);
  std::vector<std::pair<int, int>> cells;
  for (int seg : o.seg_counts)
    for (int mat : o.mat_counts)
      if (seg != 0 || mat != 0) cells.push_back({seg, mat});  // (0,0) has nothing to train on
  if (cells.empty()) throw std::runtime_error("sweep grid is empty after excluding (0,0)");
  fs::create_directories(base.output_dir);

  std::vector<SweepRow> rows;
  int executed = 0, resumed = 0, failed = 0;
  std::mutex mu;

  const int jobs = std::max(1, o.jobs);
  for (std::size_t next = 0; next < cells.size(); next += jobs) {
    std::vector<std::future<SweepCellResult>> batch;
    const std::size_t end = std::min(cells.size(), next + jobs);
    for (std::size_t i = next; i < end; ++i)
      batch.push_back(std::async(jobs > 1 ? std::launch::async : std::launch::deferred,
                                 run_sweep_cell, base, cells[i].first, cells[i].second));
    for (std::size_t i = next; i < end; ++i) {
      const SweepCellResult res = batch[i - next].get();
      std::lock_guard<std::mutex> lock(mu);
      std::printf("cell seg=%d mat=%d: %s\n", cells[i].first, cells[i].second,
                  res.message.c_str());
      if (res.failed)
        ++failed;
      else if (res.resumed)
        ++resumed;
      else
        ++executed;
      rows.insert(rows.end(), res.rows.begin(), res.rows.end());
    }
  }

  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::tie(a.seg_n, a.mat_n, a.eval_set) < std::tie(b.seg_n, b.mat_n, b.eval_set);
  });
  const std::string csv = base.output_dir + "/results.csv";
  write_sweep_csv(csv, rows);
  std::printf("sweep: %d trained, %d resumed, %d failed; results: %s\n", executed, resumed,
              failed, csv.c_str());
  return failed ? 1 : 0;
}

// ---- plot --------------------------------------------------------------------

struct PlotOpts {
  std::string csv;
  std::string out;
};

int cmd_plot(const PlotOpts& o) {
  const std::vector<SweepRow> rows = parse_sweep_csv(o.csv);
  const std::string out = o.out.empty() ? fs::path(o.csv).parent_path().string() : o.out;
  fs::create_directories(out.empty() ? "." : out);
  for (const std::string& f : render_sweep_charts(rows, out.empty() ? "." : out))
    std::printf("wrote %s\n", f.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"weakly semi-supervised human matting: data, training, evaluation"};
  app.require_subcommand(1);
  int rc = 0;
  auto guard = [&rc](auto fn) {
    return [&rc, fn] {
      try {
        rc = fn();
      } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        rc = 1;
      }
    };
  };

  MakeDataOpts make_opts;
  CLI::App* make = app.add_subcommand("make-toy-data", "generate the procedural dataset");
  make->add_option("--out", make_opts.out, "dataset root directory");
  make->add_option("--n-matte", make_opts.cfg.n_matte, "foreground+alpha training samples");
  make->add_option("--n-seg", make_opts.cfg.n_seg, "coarse-mask training samples");
  make->add_option("--n-eval", make_opts.cfg.n_eval, "held-out samples per eval domain");
  make->add_option("--n-backgrounds", make_opts.cfg.n_backgrounds, "background pool size");
  make->add_option("--image-size", make_opts.cfg.image_size, "square sample size in pixels");
  make->add_option("--seed", make_opts.cfg.seed, "generation seed");
  make->add_flag("--overwrite", make_opts.cfg.overwrite, "replace an existing dataset");
  make->callback(guard([&] { return cmd_make_toy_data(make_opts); }));

  ComposeOpts compose_opts;
  CLI::App* compose = app.add_subcommand("compose", "write composite previews from matte data");
  add_common(compose, compose_opts.common);
  compose->add_option("--out", compose_opts.out, "output directory")->required();
  compose->add_option("--count", compose_opts.count, "number of composites");
  compose->add_option("--start-index", compose_opts.start_index, "background rotation offset");
  compose->callback(guard([&] { return cmd_compose(compose_opts); }));

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "run the training pipeline or a single stage");
  add_common(train, train_opts.common);
  train->add_option("--stage", train_opts.stage, "all or one stage name")
      ->check(CLI::IsMember({"all", "seg_pretrain", "teacher_finetune", "student_mlb"}));
  train->add_option("--init", train_opts.init_ckpt, "checkpoint to start the stage from");
  train->add_option("--teacher", train_opts.teacher_ckpt,
                    "teacher checkpoint for the student stage");
  train->callback(guard([&] { return cmd_train(train_opts); }));

  EvaluateOpts eval_opts;
  CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the eval sets");
  add_common(evaluate, eval_opts.common);
  evaluate->add_option("--checkpoint", eval_opts.checkpoint, "network checkpoint")->required();
  evaluate->add_option("--eval-set", eval_opts.only_sets, "restrict to named sets, repeatable");
  evaluate->callback(guard([&] { return cmd_evaluate(eval_opts); }));

  BenchmarkOpts bench_opts;
  CLI::App* bench = app.add_subcommand("benchmark", "measure inference throughput");
  add_common(bench, bench_opts.common);
  bench->add_option("--checkpoint", bench_opts.checkpoint, "network checkpoint")->required();
  bench->add_option("--edge", bench_opts.edge, "square input edge in pixels");
  bench->add_option("--iters", bench_opts.iters, "timed forward passes");
  bench->add_option("--warmup", bench_opts.warmup, "untimed warmup passes");
  bench->add_option("--hardware", bench_opts.hardware, "host descriptor echoed in the report");
  bench->callback(guard([&] { return cmd_benchmark(bench_opts); }));

  SweepOpts sweep_opts;
  CLI::App* sweep = app.add_subcommand("sweep", "train every (seg_n, mat_n) grid cell");
  add_common(sweep, sweep_opts.common);
  sweep->add_option("--seg-counts", sweep_opts.seg_counts, "segmentation subset sizes")
      ->required()
      ->delimiter(',');
  sweep->add_option("--mat-counts", sweep_opts.mat_counts, "matte subset sizes")
      ->required()
      ->delimiter(',');
  sweep->add_option("--jobs", sweep_opts.jobs, "cells to run concurrently");
  sweep->callback(guard([&] { return cmd_sweep(sweep_opts); }));

  PlotOpts plot_opts;
  CLI::App* plot = app.add_subcommand("plot", "render sweep charts from a results csv");
  plot->add_option("--csv", plot_opts.csv, "sweep results csv")->required();
  plot->add_option("--out", plot_opts.out, "chart directory (default: beside the csv)");
  plot->callback(guard([&] { return cmd_plot(plot_opts); }));

  CLI11_PARSE(app, argc, argv);
  return rc;
}
