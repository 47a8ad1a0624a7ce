#pragma once

// Independent reference implementations used as test oracles. They follow
// the textbook definitions directly and favour clarity over speed.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "retina/anchors.hpp"
#include "retina/boxes.hpp"
#include "retina/evaluate.hpp"
#include "retina/postprocess.hpp"
#include "retina/rng.hpp"
#include "retina/tensor.hpp"

namespace oracle {

// Random box with top-left in [lo, hi) and sides in [min_side, max_side].
retina::BBox random_box(retina::Rng& rng, double lo, double hi, double min_side, double max_side);

double iou(const retina::BBox& a, const retina::BBox& b);

// Direct-definition convolution over an explicitly zero-padded input.
retina::BasicTensor<double> conv2d(const retina::BasicTensor<double>& input,
                                   const retina::BasicTensor<double>& weights,
                                   const retina::BasicTensor<double>& bias, int stride);

struct Assignment {
  std::vector<retina::AnchorLabel> labels;
  std::vector<int> gt;
  std::vector<bool> forced;
};

Assignment assign(const std::vector<retina::BBox>& anchors, const std::vector<retina::BBox>& gts,
                  const retina::AnchorConfig& config);

// COCO-style evaluator written from the protocol description: per
// threshold, greedy matching in global score order, then the 101-point
// interpolated AP as max precision over all operating points with
// recall >= r.
std::vector<double> coco_ap(const std::vector<retina::Detection>& dets,
                            const retina::GroundTruthSet& gts,
                            const std::vector<float>& thresholds, int max_per_image);

// Greedy suppression result check (no output cap): survivors are in score
// order and pairwise at or below the threshold, and every suppressed box
// overlaps some survivor scored at least as high above it.
bool nms_result_valid(const std::vector<retina::Detection>& input,
                      const std::vector<std::size_t>& kept, float thresh);

// Fresh empty directory under the system temp dir.
std::filesystem::path temp_dir(const std::string& name);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace oracle
