#include "retina/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "retina/errors.hpp"

namespace retina {

MatchResult match_detections(std::span<const Detection> dets, std::span<const BBox> gts,
                             float iou_thresh) {
  MatchResult r;
  r.det_is_tp.assign(dets.size(), false);
  r.det_gt.assign(dets.size(), -1);
  r.gt_matched.assign(gts.size(), false);
  for (std::size_t d = 0; d < dets.size(); ++d) {
    float best = -1.f;
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (r.gt_matched[g]) continue;
      const float v = iou(dets[d].box, gts[g]);
      if (v > best) {
        best = v;
        best_gt = static_cast<int>(g);
      }
    }
    if (best_gt >= 0 && best >= iou_thresh) {
      r.det_is_tp[d] = true;
      r.det_gt[d] = best_gt;
      r.gt_matched[static_cast<std::size_t>(best_gt)] = true;
    }
  }
  return r;
}

double average_precision(const std::vector<bool>& tp_flags, std::size_t total_gt) {
  if (total_gt == 0 || tp_flags.empty()) return 0.0;
  const std::size_t n = tp_flags.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    (tp_flags[i] ? tp : fp) += 1;
    precision[i] = static_cast<double>(tp) / static_cast<double>(tp + fp);
    recall[i] = static_cast<double>(tp) / static_cast<double>(total_gt);
  }
  // Precision envelope: max precision at any recall >= recall[i].
  for (std::size_t i = n - 1; i-- > 0;) precision[i] = std::max(precision[i], precision[i + 1]);

  double sum = 0.0;
  std::size_t idx = 0;
  for (int r = 0; r <= 100; ++r) {
    const double level = r / 100.0;
    while (idx < n && recall[idx] < level) ++idx;
    sum += idx < n ? precision[idx] : 0.0;
  }
  return sum / 101.0;
}

EvalReport coco_map(std::span<const Detection> dets, const GroundTruthSet& gts,
                    const EvalConfig& config) {
  config.validate();
  EvalReport report;
  report.iou_thresholds = config.iou_thresholds;
  report.num_images = gts.size();
  for (const auto& [id, boxes] : gts) report.num_ground_truth += boxes.size();
  report.undefined = report.num_ground_truth == 0;

  // Per-image detection lists in (score desc, input index) order, capped.
  std::map<std::int64_t, std::vector<std::size_t>> by_image;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (!gts.contains(dets[i].image_id)) {
      throw InvalidInput("detection " + std::to_string(i) + " refers to unknown image_id " +
                         std::to_string(dets[i].image_id));
    }
    by_image[dets[i].image_id].push_back(i);
  }
  const auto cap = static_cast<std::size_t>(config.max_detections_per_image);
  for (auto& [id, idx] : by_image) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    if (idx.size() > cap) idx.resize(cap);
    report.num_detections += idx.size();
  }

  // Global pooling order: score desc, then image_id, then input index.
  std::vector<std::size_t> pooled;
  for (const auto& [id, idx] : by_image) pooled.insert(pooled.end(), idx.begin(), idx.end());
  std::sort(pooled.begin(), pooled.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].image_id != dets[b].image_id) return dets[a].image_id < dets[b].image_id;
    return a < b;
  });

  std::vector<bool> is_tp(dets.size(), false);
  for (float thr : config.iou_thresholds) {
    for (const auto& [id, idx] : by_image) {
      std::vector<Detection> image_dets;
      for (std::size_t i : idx) image_dets.push_back(dets[i]);
      const auto m = match_detections(image_dets, gts.at(id), thr);
      for (std::size_t j = 0; j < idx.size(); ++j) is_tp[idx[j]] = m.det_is_tp[j];
    }
    std::vector<bool> flags;
    flags.reserve(pooled.size());
    for (std::size_t i : pooled) flags.push_back(is_tp[i]);
    report.ap.push_back(average_precision(flags, report.num_ground_truth));
  }

  double sum = 0.0;
  for (double ap : report.ap) sum += ap;
  report.map = sum / static_cast<double>(report.ap.size());
  for (std::size_t i = 0; i < config.iou_thresholds.size(); ++i) {
    if (std::abs(config.iou_thresholds[i] - 0.50f) < 1e-6f) report.ap50 = report.ap[i];
    if (std::abs(config.iou_thresholds[i] - 0.75f) < 1e-6f) report.ap75 = report.ap[i];
  }
  return report;
}

}  // namespace retina
