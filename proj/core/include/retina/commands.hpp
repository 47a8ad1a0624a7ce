#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "retina/postprocess.hpp"
#include "retina/tensor.hpp"

namespace retina {

struct CliOptions {
  std::string command;
  std::filesystem::path config;
  std::filesystem::path out = ".";
  std::filesystem::path manifest;
  std::filesystem::path val_manifest;
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  bool annotate = false;
  /// train: continue from the checkpoint (or its .partial) if present.
  bool resume = false;
  /// eval: score the manifest boxes themselves as detections.
  bool replay_gt = false;
  /// gradcheck: perturb one analytic gradient of this suite.
  std::string sabotage;
  std::optional<int> num_images;
  std::optional<std::uint64_t> seed;
  /// Worker threads; 0 means RETINA_KIT_THREADS or the machine's cores.
  int threads = 0;
};

/// Runs one command and returns the process exit code: 0 success,
/// 1 validation error, 2 runtime or numeric error, 3 I/O error.
int run_command(const CliOptions& options, std::ostream& out, std::ostream& err);

int cmd_synth(const CliOptions& options, std::ostream& out);
int cmd_train(const CliOptions& options, std::ostream& out);
int cmd_eval(const CliOptions& options, std::ostream& out);
int cmd_detect(const CliOptions& options, std::ostream& out);
int cmd_gradcheck(const CliOptions& options, std::ostream& out, std::ostream& err);

/// Draws 1-px box outlines into a [3, H, W] image in place.
void draw_boxes(Tensor& image, std::span<const Detection> dets);

}  // namespace retina
