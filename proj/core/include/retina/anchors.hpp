#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "retina/boxes.hpp"

namespace retina {

struct AnchorLevel {
  int stride = 8;
  float base_size = 16.f;

  bool operator==(const AnchorLevel&) const = default;
};

struct AnchorConfig {
  std::vector<AnchorLevel> levels{{8, 16.f}, {16, 32.f}};
  std::vector<float> scales{1.f, 1.2599210498948732f, 1.5874010519681994f};
  /// height / width
  std::vector<float> ratios{0.5f, 1.f, 2.f};
  float pos_iou = 0.5f;
  float neg_iou = 0.4f;
  bool force_match = true;

  std::size_t anchors_per_cell() const noexcept { return scales.size() * ratios.size(); }
  int max_stride() const;

  /// Throws InvalidInput naming the first violated invariant.
  void validate() const;

  bool operator==(const AnchorConfig&) const = default;
};

struct LevelShape {
  int stride = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Anchors in level-major, row, column, (scale, ratio) order. Within a
/// cell the index is scale_index * ratios.size() + ratio_index.
struct AnchorGrid {
  std::vector<BBox> anchors;
  std::vector<std::size_t> per_level_counts;
  std::vector<LevelShape> levels;
  std::size_t anchors_per_cell = 0;
  int image_width = 0;
  int image_height = 0;

  std::size_t size() const noexcept { return anchors.size(); }
  /// Index of the first anchor of `level` in the flat list.
  std::size_t level_offset(std::size_t level) const;
};

AnchorGrid generate_anchors(const AnchorConfig& config, int image_width, int image_height);

enum class AnchorLabel : std::uint8_t { kNegative, kIgnore, kPositive };

struct AnchorTarget {
  AnchorLabel label = AnchorLabel::kNegative;
  /// Matched ground-truth index for positives, -1 otherwise.
  int gt_index = -1;
  /// Set when the low-quality force-match rule produced this positive.
  bool forced = false;
  /// Max IoU over ground truths (0 when there are none).
  float max_iou = 0.f;
};

struct AnchorAssignment {
  std::vector<AnchorTarget> targets;
  /// encode(gt, anchor) for positives; zero elsewhere.
  std::vector<BoxDelta> regression_targets;
  std::size_t num_positive = 0;

  std::size_t count(AnchorLabel label) const;
};

AnchorAssignment assign_targets(const AnchorGrid& grid, std::span<const BBox> gts,
                                const AnchorConfig& config);

}  // namespace retina
