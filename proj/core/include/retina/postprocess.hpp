#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "retina/anchors.hpp"
#include "retina/boxes.hpp"
#include "retina/tensor.hpp"

namespace retina {

struct Detection {
  BBox box;
  float score = 0.f;
  int class_id = 0;
  std::int64_t image_id = 0;

  bool operator==(const Detection&) const = default;
};

struct EvalConfig {
  std::vector<float> iou_thresholds{0.50f, 0.55f, 0.60f, 0.65f, 0.70f,
                                    0.75f, 0.80f, 0.85f, 0.90f, 0.95f};
  float score_threshold = 0.05f;
  int pre_nms_topk = 1000;
  float nms_iou = 0.5f;
  int max_detections_per_image = 100;

  void validate() const;
  bool operator==(const EvalConfig&) const = default;
};

/// Greedy NMS for one image and class. Output is in descending score order
/// (ties: lower input index first).
std::vector<Detection> nms(std::span<const Detection> dets, float iou_thresh, int max_out);

/// Indices form of nms(), into `dets`.
std::vector<std::size_t> nms_indices(std::span<const Detection> dets, float iou_thresh,
                                     int max_out);

/// Sigmoid scores, score threshold, per-level top-k, anchor decoding,
/// clipping and per-class NMS. Head maps are laid out as TinyNet produces.
std::vector<Detection> decode_detections(const std::vector<Tensor>& cls_logits,
                                         const std::vector<Tensor>& box_deltas,
                                         const AnchorGrid& grid, const EvalConfig& config,
                                         int image_width, int image_height,
                                         std::int64_t image_id = 0);

}  // namespace retina
