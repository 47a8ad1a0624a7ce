#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "retina/anchors.hpp"
#include "retina/checkpoint.hpp"
#include "retina/evaluate.hpp"
#include "retina/manifest.hpp"
#include "retina/network.hpp"
#include "retina/run_config.hpp"

namespace retina {

/// A manifest entry loaded, preprocessed to the network input size, with
/// boxes rescaled to match.
struct PreparedSample {
  Tensor input;
  std::vector<BBox> boxes;
  std::vector<int> labels;
  /// Boxes as listed in the manifest, in original pixel coordinates.
  std::vector<BBox> original_boxes;
  int original_width = 0;
  int original_height = 0;
};

PreparedSample prepare_sample(const SampleRecord& record, const std::filesystem::path& manifest,
                              const RunConfig& config);

/// Loads every record of a manifest; missing images raise IoError naming
/// the path.
std::vector<PreparedSample> prepare_dataset(const std::vector<SampleRecord>& records,
                                            const std::filesystem::path& manifest,
                                            const RunConfig& config, int threads);

std::vector<int> anchor_strides(const AnchorConfig& config);

/// Builds the network described by a config.
TinyNet make_network(const RunConfig& config);

/// Detections for one preprocessed input, with boxes mapped back to the
/// original image resolution.
std::vector<Detection> detect(const TinyNet& net, const Parameters& params,
                              const AnchorGrid& grid, const RunConfig& config,
                              const PreparedSample& sample, std::int64_t image_id);

struct DatasetEvaluation {
  std::vector<Detection> detections;
  EvalReport report;
};

DatasetEvaluation evaluate_dataset(const TinyNet& net, const Parameters& params,
                                   const RunConfig& config,
                                   const std::vector<PreparedSample>& samples, int threads);

GroundTruthSet ground_truth_of(const std::vector<PreparedSample>& samples);

/// Per-image loss and parameter gradients (not yet batch-averaged).
struct SampleGradient {
  double loss = 0.0;
  Parameters grads;
};

SampleGradient sample_gradient(const TinyNet& net, const Parameters& params,
                               const AnchorGrid& grid, const RunConfig& config,
                               const Tensor& input, const std::vector<BBox>& boxes,
                               const std::vector<int>& labels);

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_map;
  std::optional<double> val_ap50;
};

struct TrainOptions {
  std::filesystem::path checkpoint_path;
  /// Metrics JSONL; truncated on a fresh run, appended on resume.
  std::filesystem::path metrics_path;
  bool resume = false;
  int threads = 1;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochMetrics> metrics;
};

/// The full loop: shuffle, augment, assign, forward, loss, backward, batch
/// mean, Adam. Each epoch's shuffle and augmentation draws come from
/// streams derived from (seed, epoch, sample), so a resumed run continues
/// exactly where an uninterrupted one would be.
TrainResult train(const RunConfig& config, const std::vector<PreparedSample>& train_set,
                  const std::vector<PreparedSample>& val_set, const TrainOptions& options);

std::string format_metrics_line(const EpochMetrics& m);

}  // namespace retina
