#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "retina/anchors.hpp"
#include "retina/errors.hpp"
#include "support/oracles.hpp"

using retina::AnchorConfig;
using retina::AnchorLabel;
using retina::BBox;

namespace {

AnchorConfig single_level() {
  AnchorConfig c;
  c.levels = {{8, 32.f}};
  return c;
}

std::size_t expected_count(const AnchorConfig& c, int w, int h) {
  std::size_t n = 0;
  for (const auto& l : c.levels) {
    n += static_cast<std::size_t>((w + l.stride - 1) / l.stride) *
         static_cast<std::size_t>((h + l.stride - 1) / l.stride) * c.anchors_per_cell();
  }
  return n;
}

}  // namespace

TEST(AnchorConfig, Validation) {
  AnchorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.neg_iou = 0.6f;
  EXPECT_THROW(c.validate(), retina::InvalidInput);
  c = {};
  c.levels = {{16, 32.f}, {8, 16.f}};
  EXPECT_THROW(c.validate(), retina::InvalidInput);
  c = {};
  c.scales.clear();
  EXPECT_THROW(c.validate(), retina::InvalidInput);
  c = {};
  c.ratios = {1.f, -2.f};
  EXPECT_THROW(c.validate(), retina::InvalidInput);
}

TEST(GenerateAnchors, SingleLevelCount) {
  const auto grid = retina::generate_anchors(single_level(), 64, 64);
  EXPECT_EQ(grid.size(), 576u);
  ASSERT_EQ(grid.per_level_counts.size(), 1u);
  EXPECT_EQ(grid.per_level_counts[0], 576u);
}

TEST(GenerateAnchors, FirstSquareAnchor) {
  const auto c = single_level();
  const auto grid = retina::generate_anchors(c, 64, 64);
  // Cell (0,0), scale index 0, ratio index 1 (ratio 1).
  const BBox a = grid.anchors[0 * c.ratios.size() + 1];
  EXPECT_FLOAT_EQ(a.x1(), -12.f);
  EXPECT_FLOAT_EQ(a.y1(), -12.f);
  EXPECT_FLOAT_EQ(a.x2(), 20.f);
  EXPECT_FLOAT_EQ(a.y2(), 20.f);
}

TEST(GenerateAnchors, ShapesFollowScaleAndRatio) {
  const AnchorConfig c;
  const auto grid = retina::generate_anchors(c, 64, 64);
  std::size_t idx = 0;
  for (const auto& level : c.levels) {
    const std::size_t cells = static_cast<std::size_t>(64 / level.stride);
    for (std::size_t r = 0; r < cells; ++r) {
      for (std::size_t col = 0; col < cells; ++col) {
        for (float s : c.scales) {
          for (float ratio : c.ratios) {
            const BBox& a = grid.anchors[idx++];
            const double side = level.base_size * s;
            EXPECT_NEAR(a.center_x(), (col + 0.5) * level.stride, 1e-4);
            EXPECT_NEAR(a.center_y(), (r + 0.5) * level.stride, 1e-4);
            EXPECT_NEAR(a.width(), side / std::sqrt(ratio), 1e-4);
            EXPECT_NEAR(a.height(), side * std::sqrt(ratio), 1e-4);
            EXPECT_NEAR(static_cast<double>(a.width()) * a.height(), side * side, 1e-2);
          }
        }
      }
    }
  }
  EXPECT_EQ(idx, grid.size());
}

TEST(GenerateAnchors, CountFormulaAcrossSizes) {
  AnchorConfig c;
  c.levels = {{4, 8.f}, {8, 16.f}, {16, 32.f}};
  c.ratios = {1.f, 2.f};
  for (auto [w, h] : {std::pair{64, 64}, std::pair{48, 32}, std::pair{16, 80}}) {
    const auto grid = retina::generate_anchors(c, w, h);
    EXPECT_EQ(grid.size(), expected_count(c, w, h));
    EXPECT_EQ(std::accumulate(grid.per_level_counts.begin(), grid.per_level_counts.end(),
                              std::size_t{0}),
              grid.size());
  }
}

TEST(GenerateAnchors, Deterministic) {
  const AnchorConfig c;
  EXPECT_EQ(retina::generate_anchors(c, 64, 64).anchors, retina::generate_anchors(c, 64, 64).anchors);
}

TEST(GenerateAnchors, NonDivisibleNamesStride) {
  try {
    retina::generate_anchors(AnchorConfig{}, 72, 64);
    FAIL() << "expected rejection";
  } catch (const retina::InvalidInput& e) {
    EXPECT_NE(std::string(e.what()).find("16"), std::string::npos) << e.what();
  }
}

TEST(AssignTargets, NoGtAllNegative) {
  const auto grid = retina::generate_anchors(AnchorConfig{}, 64, 64);
  const auto a = retina::assign_targets(grid, {}, AnchorConfig{});
  EXPECT_EQ(a.count(AnchorLabel::kNegative), grid.size());
  EXPECT_EQ(a.num_positive, 0u);
}

TEST(AssignTargets, GtEqualToAnchor) {
  const AnchorConfig c;
  const auto grid = retina::generate_anchors(c, 64, 64);
  const std::size_t k = 100;
  const std::vector<BBox> gts{grid.anchors[k]};
  const auto a = retina::assign_targets(grid, gts, c);
  EXPECT_EQ(a.targets[k].label, AnchorLabel::kPositive);
  EXPECT_EQ(a.targets[k].gt_index, 0);
  EXPECT_FALSE(a.targets[k].forced);
  EXPECT_EQ(a.regression_targets[k], retina::BoxDelta{});
}

TEST(AssignTargets, MatchesBruteForceOracle) {
  retina::Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    AnchorConfig c = trial % 2 == 0 ? single_level() : AnchorConfig{};
    c.force_match = trial % 3 != 0;
    const auto grid = retina::generate_anchors(c, 64, 64);
    std::vector<BBox> gts;
    const int n = trial < 100 ? 1 : 1 + static_cast<int>(rng.uniform_int(0, 3));
    for (int g = 0; g < n; ++g) gts.push_back(oracle::random_box(rng, -4, 56, 2, 40));
    const auto got = retina::assign_targets(grid, gts, c);
    const auto want = oracle::assign(grid.anchors, gts, c);
    std::size_t positives = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      ASSERT_EQ(got.targets[i].label, want.labels[i]) << "trial " << trial << " anchor " << i;
      ASSERT_EQ(got.targets[i].forced, want.forced[i]) << "trial " << trial << " anchor " << i;
      if (want.labels[i] == AnchorLabel::kPositive) {
        ++positives;
        ASSERT_EQ(got.targets[i].gt_index, want.gt[i]);
        EXPECT_EQ(got.regression_targets[i],
                  retina::encode(gts[static_cast<std::size_t>(want.gt[i])], grid.anchors[i]));
      }
    }
    EXPECT_EQ(got.num_positive, positives);
  }
}

TEST(AssignTargets, PartitionAndLabelInvariants) {
  retina::Rng rng(4);
  const AnchorConfig c;
  const auto grid = retina::generate_anchors(c, 64, 64);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<BBox> gts;
    for (int g = 0; g < 3; ++g) gts.push_back(oracle::random_box(rng, 0, 50, 4, 30));
    const auto a = retina::assign_targets(grid, gts, c);
    EXPECT_EQ(a.count(AnchorLabel::kPositive) + a.count(AnchorLabel::kNegative) +
                  a.count(AnchorLabel::kIgnore),
              grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& t = a.targets[i];
      float m = 0.f;
      for (const auto& g : gts) m = std::max(m, retina::iou(grid.anchors[i], g));
      if (t.label == AnchorLabel::kPositive && !t.forced) {
        EXPECT_GE(retina::iou(grid.anchors[i], gts[static_cast<std::size_t>(t.gt_index)]), c.pos_iou);
      }
      if (t.label == AnchorLabel::kNegative) {
        EXPECT_LT(m, c.neg_iou);
      }
    }
    // Every gt overlapping some anchor yields a positive, except when two
    // gts share the same best anchor.
    std::vector<std::size_t> best;
    for (const auto& g : gts) {
      std::size_t b = 0;
      for (std::size_t i = 1; i < grid.size(); ++i) {
        if (retina::iou(grid.anchors[i], g) > retina::iou(grid.anchors[b], g)) b = i;
      }
      if (std::find(best.begin(), best.end(), b) == best.end()) best.push_back(b);
    }
    EXPECT_GE(a.num_positive, best.size());
  }
}

TEST(AssignTargets, RaisingPosThresholdNeverAddsPositives) {
  retina::Rng rng(8);
  AnchorConfig c;
  c.force_match = false;
  c.neg_iou = 0.2f;
  const auto grid = retina::generate_anchors(c, 64, 64);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BBox> gts{oracle::random_box(rng, 0, 40, 8, 30), oracle::random_box(rng, 0, 40, 8, 30)};
    std::size_t prev = grid.size() + 1;
    for (float p : {0.3f, 0.4f, 0.5f, 0.6f, 0.7f, 0.9f}) {
      c.pos_iou = p;
      const auto n = retina::assign_targets(grid, gts, c).num_positive;
      EXPECT_LE(n, prev);
      prev = n;
    }
  }
}

TEST(AssignTargets, PermutationInvariant) {
  retina::Rng rng(12);
  const AnchorConfig c;
  const auto grid = retina::generate_anchors(c, 64, 64);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<BBox> gts;
    for (int g = 0; g < 3; ++g) gts.push_back(oracle::random_box(rng, 0, 50, 4, 30));
    const std::vector<BBox> rev(gts.rbegin(), gts.rend());
    const auto a = retina::assign_targets(grid, gts, c);
    const auto b = retina::assign_targets(grid, rev, c);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& ta = a.targets[i];
      const auto& tb = b.targets[i];
      // Exact IoU ties between different gts are the one order-sensitive case.
      bool tie = false;
      for (std::size_t x = 0; x < 3; ++x) {
        for (std::size_t y = x + 1; y < 3; ++y) {
          tie |= retina::iou(grid.anchors[i], gts[x]) == retina::iou(grid.anchors[i], gts[y]) &&
                 retina::iou(grid.anchors[i], gts[x]) > 0.f;
        }
      }
      if (tie) continue;
      EXPECT_EQ(ta.label, tb.label);
      if (ta.label == AnchorLabel::kPositive) {
        EXPECT_EQ(ta.gt_index, 2 - tb.gt_index);
      }
    }
  }
}

TEST(AssignTargets, ForceMatchFlagDistinguishesPromotions) {
  AnchorConfig c = single_level();
  const auto grid = retina::generate_anchors(c, 64, 64);
  // Small gt that no anchor overlaps at 0.5.
  const std::vector<BBox> gts{BBox(30, 30, 36, 38)};
  c.force_match = false;
  EXPECT_EQ(retina::assign_targets(grid, gts, c).num_positive, 0u);
  c.force_match = true;
  const auto a = retina::assign_targets(grid, gts, c);
  ASSERT_EQ(a.num_positive, 1u);
  for (const auto& t : a.targets) {
    if (t.label == AnchorLabel::kPositive) {
      EXPECT_TRUE(t.forced);
    }
  }
}
