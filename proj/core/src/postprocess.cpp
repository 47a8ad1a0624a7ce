#include "retina/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "retina/head_layout.hpp"
#include "retina/losses.hpp"

namespace retina {

void EvalConfig::validate() const {
  if (iou_thresholds.empty()) throw InvalidInput("eval: iou_thresholds must be non-empty");
  for (std::size_t i = 0; i < iou_thresholds.size(); ++i) {
    const float t = iou_thresholds[i];
    if (!(t > 0.f && t < 1.f)) throw InvalidInput("eval: iou thresholds must lie in (0, 1)");
    if (i > 0 && !(t > iou_thresholds[i - 1])) {
      throw InvalidInput("eval: iou thresholds must be strictly increasing");
    }
  }
  if (!(score_threshold >= 0.f && score_threshold <= 1.f)) {
    throw InvalidInput("eval: score_threshold must be in [0, 1]");
  }
  if (pre_nms_topk <= 0) throw InvalidInput("eval: pre_nms_topk must be positive");
  if (!(nms_iou >= 0.f && nms_iou <= 1.f)) throw InvalidInput("eval: nms_iou must be in [0, 1]");
  if (max_detections_per_image <= 0) {
    throw InvalidInput("eval: max_detections_per_image must be positive");
  }
}

std::vector<std::size_t> nms_indices(std::span<const Detection> dets, float iou_thresh,
                                     int max_out) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::vector<std::size_t> keep;
  std::vector<bool> suppressed(dets.size(), false);
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (static_cast<int>(keep.size()) >= max_out) break;
    const std::size_t cur = order[i];
    if (suppressed[cur]) continue;
    keep.push_back(cur);
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      const std::size_t other = order[j];
      if (!suppressed[other] && iou(dets[cur].box, dets[other].box) > iou_thresh) {
        suppressed[other] = true;
      }
    }
  }
  return keep;
}

std::vector<Detection> nms(std::span<const Detection> dets, float iou_thresh, int max_out) {
  std::vector<Detection> out;
  for (std::size_t i : nms_indices(dets, iou_thresh, max_out)) out.push_back(dets[i]);
  return out;
}

std::vector<Detection> decode_detections(const std::vector<Tensor>& cls_logits,
                                         const std::vector<Tensor>& box_deltas,
                                         const AnchorGrid& grid, const EvalConfig& config,
                                         int image_width, int image_height,
                                         std::int64_t image_id) {
  if (cls_logits.empty() || cls_logits[0].rank() != 3 || grid.anchors_per_cell == 0 ||
      cls_logits[0].dim(0) % grid.anchors_per_cell != 0) {
    throw InvalidInput("decode_detections: classification maps do not match the anchor grid");
  }
  const std::size_t k = cls_logits[0].dim(0) / grid.anchors_per_cell;
  const Tensor logits = flatten_head(cls_logits, grid, k);
  const Tensor deltas = flatten_head(box_deltas, grid, 4);

  struct Candidate {
    std::size_t anchor;
    std::size_t cls;
    float score;
  };
  std::vector<Candidate> kept;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < grid.levels.size(); ++l) {
    std::vector<Candidate> level;
    for (std::size_t a = offset; a < offset + grid.per_level_counts[l]; ++a) {
      for (std::size_t c = 0; c < k; ++c) {
        const float s = static_cast<float>(sigmoid(static_cast<double>(logits[a * k + c])));
        if (s >= config.score_threshold) level.push_back({a, c, s});
      }
    }
    // Candidates are generated in (anchor, class) order, so a stable sort
    // breaks score ties toward the lower anchor index.
    std::stable_sort(level.begin(), level.end(),
                     [](const Candidate& x, const Candidate& y) { return x.score > y.score; });
    if (level.size() > static_cast<std::size_t>(config.pre_nms_topk)) {
      level.resize(static_cast<std::size_t>(config.pre_nms_topk));
    }
    kept.insert(kept.end(), level.begin(), level.end());
    offset += grid.per_level_counts[l];
  }

  std::vector<Detection> out;
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<Detection> per_class;
    for (const auto& cand : kept) {
      if (cand.cls != c) continue;
      const std::size_t a = cand.anchor;
      const BoxDelta d{deltas[a * 4], deltas[a * 4 + 1], deltas[a * 4 + 2], deltas[a * 4 + 3]};
      const BBox box = clip_to_image(decode(grid.anchors[a], d), static_cast<float>(image_width),
                                     static_cast<float>(image_height));
      per_class.push_back({box, cand.score, static_cast<int>(c), image_id});
    }
    auto survivors = nms(per_class, config.nms_iou, config.max_detections_per_image);
    out.insert(out.end(), survivors.begin(), survivors.end());
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Detection& x, const Detection& y) { return x.score > y.score; });
  if (out.size() > static_cast<std::size_t>(config.max_detections_per_image)) {
    out.resize(static_cast<std::size_t>(config.max_detections_per_image));
  }
  return out;
}

}  // namespace retina
