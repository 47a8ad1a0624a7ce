#include <iostream>

#include <CLI11.hpp>

#include "retina/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Single-stage pedestrian detector toolkit"};
  app.require_subcommand(1, 1);

  retina::CliOptions opts;
  std::string out;
  std::string config, manifest, val_manifest, checkpoint, image;
  int num_images = -1;
  std::uint64_t seed = 0;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "Run config JSON")->required();
    sub->add_option("--out", out, "Output directory");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  common(synth);
  synth->add_option("--num-images", num_images, "Override synth.num_images");
  auto* synth_seed = synth->add_option("--seed", seed, "Override seed and synth.seed");

  auto* train = app.add_subcommand("train", "Train a detector");
  common(train);
  train->add_option("--manifest", manifest, "Training manifest")->required();
  train->add_option("--val-manifest", val_manifest, "Validation manifest");
  train->add_option("--checkpoint", checkpoint, "Checkpoint path (default from config)");
  train->add_flag("--resume", opts.resume, "Continue from an existing checkpoint");
  auto* train_seed = train->add_option("--seed", seed, "Override seed");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  common(eval);
  eval->add_option("--manifest", manifest, "Manifest to evaluate")->required();
  eval->add_option("--checkpoint", checkpoint, "Trained checkpoint");
  eval->add_flag("--replay-gt", opts.replay_gt, "Score ground truth as detections");

  auto* detect = app.add_subcommand("detect", "Run the detector on one image");
  common(detect);
  detect->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required();
  detect->add_option("--image", image, "Input PPM")->required();
  detect->add_flag("--annotate", opts.annotate, "Write annotated.ppm with box outlines");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  common(gradcheck);
  gradcheck->add_option("--sabotage", opts.sabotage, "Perturb one gradient of this suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  opts.command = app.get_subcommands().front()->get_name();
  opts.config = config;
  if (!out.empty()) opts.out = out;
  opts.manifest = manifest;
  opts.val_manifest = val_manifest;
  opts.checkpoint = checkpoint;
  opts.image = image;
  if (num_images >= 0) opts.num_images = num_images;
  if (synth_seed->count() > 0 || train_seed->count() > 0) opts.seed = seed;
  return retina::run_command(opts, std::cout, std::cerr);
}
