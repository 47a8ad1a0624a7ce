#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "retina/postprocess.hpp"

namespace retina {

struct MatchResult {
  std::vector<bool> det_is_tp;
  /// Matched ground-truth index per detection, -1 for false positives.
  std::vector<int> det_gt;
  std::vector<bool> gt_matched;
};

/// Greedy matching for one image and class. `dets` must already be in
/// descending score order; each detection takes the unmatched gt of highest
/// IoU (ties: lower gt index) when that IoU >= iou_thresh.
MatchResult match_detections(std::span<const Detection> dets, std::span<const BBox> gts,
                             float iou_thresh);

/// COCO 101-point interpolated AP over `tp_flags` ordered by descending
/// score. Returns 0 when total_gt == 0.
double average_precision(const std::vector<bool>& tp_flags, std::size_t total_gt);

using GroundTruthSet = std::map<std::int64_t, std::vector<BBox>>;

struct EvalReport {
  std::vector<float> iou_thresholds;
  std::vector<double> ap;
  double map = 0.0;
  std::optional<double> ap50;
  std::optional<double> ap75;
  std::size_t num_detections = 0;
  std::size_t num_ground_truth = 0;
  std::size_t num_images = 0;
  /// Set when there is no ground truth, making AP undefined (reported as 0).
  bool undefined = false;
};

/// Single-class COCO-style evaluation: per-image greedy matching at each
/// IoU threshold, global pooling sorted by (score desc, image_id, input
/// index), 101-point AP, and the mean over thresholds. At most
/// max_detections_per_image highest-scoring detections per image count.
EvalReport coco_map(std::span<const Detection> dets, const GroundTruthSet& gts,
                    const EvalConfig& config);

}  // namespace retina
