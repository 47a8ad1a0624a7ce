#include "retina/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "retina/errors.hpp"

namespace retina {

int AnchorConfig::max_stride() const {
  if (levels.empty()) throw InvalidInput("anchor config has no levels");
  return levels.back().stride;
}

void AnchorConfig::validate() const {
  if (levels.empty()) throw InvalidInput("anchors: at least one level required");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i].stride <= 0) throw InvalidInput("anchors: strides must be positive");
    if (!(levels[i].base_size > 0.f)) throw InvalidInput("anchors: base_size must be positive");
    if (i > 0 && levels[i].stride <= levels[i - 1].stride) {
      throw InvalidInput("anchors: strides must be strictly increasing");
    }
  }
  if (scales.empty() || ratios.empty()) {
    throw InvalidInput("anchors: scales and ratios must be non-empty");
  }
  for (float s : scales) {
    if (!(s > 0.f)) throw InvalidInput("anchors: scales must be positive");
  }
  for (float r : ratios) {
    if (!(r > 0.f)) throw InvalidInput("anchors: ratios must be positive");
  }
  if (!(neg_iou >= 0.f && neg_iou <= pos_iou && pos_iou <= 1.f)) {
    throw InvalidInput("anchors: require 0 <= neg_iou <= pos_iou <= 1");
  }
}

std::size_t AnchorGrid::level_offset(std::size_t level) const {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < level; ++i) offset += per_level_counts.at(i);
  return offset;
}

AnchorGrid generate_anchors(const AnchorConfig& config, int image_width, int image_height) {
  config.validate();
  if (image_width <= 0 || image_height <= 0) {
    throw InvalidInput("anchors: image size must be positive");
  }
  for (const auto& level : config.levels) {
    if (image_width % level.stride != 0 || image_height % level.stride != 0) {
      throw InvalidInput("anchors: image size " + std::to_string(image_width) + "x" +
                         std::to_string(image_height) + " is not divisible by stride " +
                         std::to_string(level.stride));
    }
  }

  // Cell-relative shapes are shared by every cell of a level.
  struct Shape2 {
    double half_w;
    double half_h;
  };

  AnchorGrid grid;
  grid.image_width = image_width;
  grid.image_height = image_height;
  grid.anchors_per_cell = config.anchors_per_cell();
  for (const auto& level : config.levels) {
    std::vector<Shape2> shapes;
    for (float scale : config.scales) {
      for (float ratio : config.ratios) {
        const double side = static_cast<double>(level.base_size) * scale;
        const double root = std::sqrt(static_cast<double>(ratio));
        shapes.push_back({0.5 * side / root, 0.5 * side * root});
      }
    }
    const auto rows = static_cast<std::size_t>(image_height / level.stride);
    const auto cols = static_cast<std::size_t>(image_width / level.stride);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const double cx = (static_cast<double>(c) + 0.5) * level.stride;
        const double cy = (static_cast<double>(r) + 0.5) * level.stride;
        for (const auto& s : shapes) {
          grid.anchors.emplace_back(static_cast<float>(cx - s.half_w),
                                    static_cast<float>(cy - s.half_h),
                                    static_cast<float>(cx + s.half_w),
                                    static_cast<float>(cy + s.half_h));
        }
      }
    }
    grid.per_level_counts.push_back(rows * cols * shapes.size());
    grid.levels.push_back({level.stride, rows, cols});
  }
  return grid;
}

std::size_t AnchorAssignment::count(AnchorLabel label) const {
  return static_cast<std::size_t>(std::count_if(
      targets.begin(), targets.end(), [label](const AnchorTarget& t) { return t.label == label; }));
}

AnchorAssignment assign_targets(const AnchorGrid& grid, std::span<const BBox> gts,
                                const AnchorConfig& config) {
  const std::size_t n = grid.size();
  AnchorAssignment out;
  out.targets.resize(n);
  out.regression_targets.resize(n);

  for (const auto& gt : gts) {
    if (!(gt.width() > 0.f && gt.height() > 0.f)) {
      throw InvalidInput("assign_targets: ground-truth boxes must have positive area");
    }
  }
  if (gts.empty()) return out;

  // Per-gt best anchor for force matching; strict '>' keeps the lowest index.
  std::vector<float> best_iou(gts.size(), 0.f);
  std::vector<std::size_t> best_anchor(gts.size(), 0);

  for (std::size_t a = 0; a < n; ++a) {
    float m = 0.f;
    int g = 0;
    for (std::size_t j = 0; j < gts.size(); ++j) {
      const float v = iou(grid.anchors[a], gts[j]);
      if (v > m) {
        m = v;
        g = static_cast<int>(j);
      }
      if (v > best_iou[j]) {
        best_iou[j] = v;
        best_anchor[j] = a;
      }
    }
    auto& t = out.targets[a];
    t.max_iou = m;
    if (m >= config.pos_iou && m > 0.f) {
      t.label = AnchorLabel::kPositive;
      t.gt_index = g;
    } else if (m < config.neg_iou) {
      t.label = AnchorLabel::kNegative;
    } else {
      t.label = AnchorLabel::kIgnore;
    }
  }

  if (config.force_match) {
    // An anchor claimed by several gts goes to the one it overlaps most
    // (lowest gt index on ties).
    std::vector<int> forced_gt(n, -1);
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (!(best_iou[j] > 0.f)) continue;
      const std::size_t a = best_anchor[j];
      if (forced_gt[a] < 0 || best_iou[j] > best_iou[static_cast<std::size_t>(forced_gt[a])]) {
        forced_gt[a] = static_cast<int>(j);
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      if (forced_gt[a] < 0) continue;
      auto& t = out.targets[a];
      const bool already = t.label == AnchorLabel::kPositive && t.gt_index == forced_gt[a];
      t.label = AnchorLabel::kPositive;
      t.gt_index = forced_gt[a];
      t.forced = !already;
    }
  }

  for (std::size_t a = 0; a < n; ++a) {
    const auto& t = out.targets[a];
    if (t.label != AnchorLabel::kPositive) continue;
    out.regression_targets[a] = encode(gts[static_cast<std::size_t>(t.gt_index)], grid.anchors[a]);
    ++out.num_positive;
  }
  return out;
}

}  // namespace retina
