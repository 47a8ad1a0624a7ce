#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "retina/anchors.hpp"
#include "retina/augment.hpp"
#include "retina/losses.hpp"
#include "retina/network.hpp"
#include "retina/optimizer.hpp"
#include "retina/postprocess.hpp"
#include "retina/synth.hpp"

namespace retina {

struct TrainingConfig {
  float lr = 0.001f;
  int batch_size = 8;
  int epochs = 30;
  int eval_every = 5;
  /// Network input size; images are resized to it.
  int input_width = 64;
  int input_height = 64;
  bool augment = true;
  std::string checkpoint_path = "checkpoint.rkck";

  bool operator==(const TrainingConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  AnchorConfig anchors;
  LossConfig loss;
  NetworkConfig network;
  AugmentConfig augment;
  SynthConfig synth;
  EvalConfig eval;
  TrainingConfig training;

  /// Section invariants plus cross-checks (anchor strides served by the
  /// network stem, input size divisible by the largest stride, anchors per
  /// cell consistent). Throws InvalidInput.
  void validate() const;

  AdamConfig adam() const;

  bool operator==(const RunConfig&) const = default;
};

/// Missing keys take defaults; unknown keys are rejected.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Every field written out, defaults included, in a stable key order.
std::string run_config_to_json(const RunConfig& config, int indent = 2);

}  // namespace retina
