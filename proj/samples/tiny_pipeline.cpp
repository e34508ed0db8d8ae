// End-to-end walkthrough at doll-house scale: generate a two-domain toy
// dataset, run the three training stages, and print the evaluation reports.
// Finishes in well under a minute on one core; nothing here is tuned to
// produce good mattes, it only shows the moving parts.
#include <matteblend/config.hpp>
#include <matteblend/data/toyworld.hpp>
#include <matteblend/train/trainer.hpp>

#include <cstdio>
#include <filesystem>

using namespace matteblend;

int main() {
  const std::string root = (std::filesystem::temp_directory_path() / "tiny_pipeline").string();

  ToyConfig world_cfg;
  world_cfg.n_matte = 6;
  world_cfg.n_seg = 10;
  world_cfg.n_eval = 3;
  world_cfg.n_backgrounds = 4;
  world_cfg.image_size = 96;
  world_cfg.overwrite = true;
  const ToyWorldPaths world = generate_toy_world(root + "/data", world_cfg);
  std::printf("toy world under %s/data\n", root.c_str());

  ExperimentConfig cfg = toy_defaults();
  cfg.network.width_multiplier = 0.25;
  cfg.data.seg_dir = world.seg;
  cfg.data.matte_fg_dir = world.matte_fg;
  cfg.data.backgrounds_dir = world.backgrounds;
  cfg.data.eval_sets = {{"natural", world.eval_natural}, {"composite", world.eval_matte}};
  cfg.seg_pretrain.iterations = 20;
  cfg.seg_pretrain.batch_size = 4;
  cfg.teacher_finetune.iterations = 10;
  cfg.teacher_finetune.batch_size = 4;
  cfg.student_mlb.iterations = 20;
  cfg.student_mlb.batch_size = 4;
  cfg.augment.crop_min = 48;
  cfg.augment.crop_max = 64;
  cfg.eval.shorter_edge = 96;
  cfg.output_dir = root + "/run";

  const PipelineArtifacts art = run_pipeline(cfg);
  std::printf("final stage: %s\nfinal checkpoint: %s\n", to_string(art.final_stage),
              art.final_checkpoint.c_str());
  for (const auto& [name, report] : art.reports) {
    std::printf("eval '%s': %d images, whole mse %.2f, whole sad %.3f", name.c_str(),
                report.n_images, report.mse_whole, report.sad_whole);
    if (report.mse_boundary) std::printf(", boundary mse %.2f", *report.mse_boundary);
    std::printf("\n");
  }
  return 0;
}
