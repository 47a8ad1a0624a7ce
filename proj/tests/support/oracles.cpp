#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>

namespace oracle {

using retina::BBox;

BBox random_box(retina::Rng& rng, double lo, double hi, double min_side, double max_side) {
  const double x = rng.uniform(lo, hi);
  const double y = rng.uniform(lo, hi);
  const double w = rng.uniform(min_side, max_side);
  const double h = rng.uniform(min_side, max_side);
  return BBox(static_cast<float>(x), static_cast<float>(y), static_cast<float>(x + w),
              static_cast<float>(y + h));
}

double iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min<double>(a.x2(), b.x2()) - std::max<double>(a.x1(), b.x1()));
  const double ih = std::max(0.0, std::min<double>(a.y2(), b.y2()) - std::max<double>(a.y1(), b.y1()));
  const double inter = iw * ih;
  const double area_a = (static_cast<double>(a.x2()) - a.x1()) * (static_cast<double>(a.y2()) - a.y1());
  const double area_b = (static_cast<double>(b.x2()) - b.x1()) * (static_cast<double>(b.y2()) - b.y1());
  const double uni = area_a + area_b - inter;
  return uni > 0 ? inter / uni : 0.0;
}

retina::BasicTensor<double> conv2d(const retina::BasicTensor<double>& input,
                                   const retina::BasicTensor<double>& weights,
                                   const retina::BasicTensor<double>& bias, int stride) {
  const std::size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
  const std::size_t cout = weights.dim(0), k = weights.dim(2);
  const std::size_t pad = k / 2;
  retina::BasicTensor<double> padded({cin, h + 2 * pad, w + 2 * pad});
  for (std::size_t c = 0; c < cin; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) padded.at(c, y + pad, x + pad) = input.at(c, y, x);
    }
  }
  const std::size_t s = static_cast<std::size_t>(stride);
  const std::size_t oh = (h + s - 1) / s, ow = (w + s - 1) / s;
  retina::BasicTensor<double> out({cout, oh, ow});
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double acc = bias[o];
        for (std::size_t c = 0; c < cin; ++c) {
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
              acc += weights[((o * cin + c) * k + ky) * k + kx] *
                     padded.at(c, oy * s + ky, ox * s + kx);
            }
          }
        }
        out.at(o, oy, ox) = acc;
      }
    }
  }
  return out;
}

Assignment assign(const std::vector<BBox>& anchors, const std::vector<BBox>& gts,
                  const retina::AnchorConfig& config) {
  const std::size_t n = anchors.size();
  Assignment out{std::vector<retina::AnchorLabel>(n, retina::AnchorLabel::kNegative),
                 std::vector<int>(n, -1), std::vector<bool>(n, false)};
  if (gts.empty()) return out;
  std::vector<std::vector<float>> m(n, std::vector<float>(gts.size()));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t g = 0; g < gts.size(); ++g) m[a][g] = retina::iou(anchors[a], gts[g]);
  }
  for (std::size_t a = 0; a < n; ++a) {
    const auto it = std::max_element(m[a].begin(), m[a].end());
    const float best = *it;
    const int g = static_cast<int>(it - m[a].begin());
    if (best > 0.f && best >= config.pos_iou) {
      out.labels[a] = retina::AnchorLabel::kPositive;
      out.gt[a] = g;
    } else if (best < config.neg_iou) {
      out.labels[a] = retina::AnchorLabel::kNegative;
    } else {
      out.labels[a] = retina::AnchorLabel::kIgnore;
    }
  }
  if (!config.force_match) return out;
  // Each gt nominates its best anchor; an anchor nominated twice keeps the
  // gt it overlaps most.
  std::vector<int> claim(n, -1);
  for (std::size_t g = 0; g < gts.size(); ++g) {
    std::size_t best_a = 0;
    for (std::size_t a = 1; a < n; ++a) {
      if (m[a][g] > m[best_a][g]) best_a = a;
    }
    if (m[best_a][g] <= 0.f) continue;
    const int prev = claim[best_a];
    if (prev < 0 || m[best_a][g] > m[best_a][static_cast<std::size_t>(prev)]) {
      claim[best_a] = static_cast<int>(g);
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    if (claim[a] < 0) continue;
    out.forced[a] = !(out.labels[a] == retina::AnchorLabel::kPositive && out.gt[a] == claim[a]);
    out.labels[a] = retina::AnchorLabel::kPositive;
    out.gt[a] = claim[a];
  }
  return out;
}

std::vector<double> coco_ap(const std::vector<retina::Detection>& dets,
                            const retina::GroundTruthSet& gts,
                            const std::vector<float>& thresholds, int max_per_image) {
  std::size_t total_gt = 0;
  for (const auto& [id, b] : gts) total_gt += b.size();

  // Keep the top max_per_image of each image.
  std::vector<std::size_t> keep;
  for (const auto& [id, boxes] : gts) {
    std::vector<std::size_t> mine;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (dets[i].image_id == id) mine.push_back(i);
    }
    std::stable_sort(mine.begin(), mine.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
    for (std::size_t j = 0; j < mine.size() && j < static_cast<std::size_t>(max_per_image); ++j) {
      keep.push_back(mine[j]);
    }
  }
  std::sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    if (dets[a].image_id != dets[b].image_id) return dets[a].image_id < dets[b].image_id;
    return a < b;
  });

  std::vector<double> aps;
  for (float t : thresholds) {
    if (total_gt == 0) {
      aps.push_back(0.0);
      continue;
    }
    // Matching is per image in score order, so order within one image is
    // what matters; the global order above is already score-sorted.
    std::map<std::int64_t, std::vector<bool>> used;
    for (const auto& [id, boxes] : gts) used[id].assign(boxes.size(), false);
    std::vector<double> precision, recall;
    std::size_t tp = 0;
    for (std::size_t n = 0; n < keep.size(); ++n) {
      const auto& d = dets[keep[n]];
      const auto& boxes = gts.at(d.image_id);
      int match = -1;
      float best = 0.f;
      for (std::size_t g = 0; g < boxes.size(); ++g) {
        if (used[d.image_id][g]) continue;
        const float v = retina::iou(d.box, boxes[g]);
        if (v >= t && (match < 0 || v > best)) {
          match = static_cast<int>(g);
          best = v;
        }
      }
      if (match >= 0) {
        used[d.image_id][static_cast<std::size_t>(match)] = true;
        ++tp;
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(n + 1));
      recall.push_back(static_cast<double>(tp) / static_cast<double>(total_gt));
    }
    double sum = 0.0;
    for (int r = 0; r <= 100; ++r) {
      double p = 0.0;
      for (std::size_t i = 0; i < precision.size(); ++i) {
        if (recall[i] >= r / 100.0) p = std::max(p, precision[i]);
      }
      sum += p;
    }
    aps.push_back(sum / 101.0);
  }
  return aps;
}

bool nms_result_valid(const std::vector<retina::Detection>& input,
                      const std::vector<std::size_t>& kept, float thresh) {
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      if (retina::iou(input[kept[i]].box, input[kept[j]].box) > thresh) return false;
      if (input[kept[i]].score < input[kept[j]].score) return false;
    }
  }
  std::vector<bool> is_kept(input.size(), false);
  for (auto k : kept) is_kept[k] = true;
  for (std::size_t i = 0; i < input.size(); ++i) {
    if (is_kept[i]) continue;
    bool covered = false;
    for (auto k : kept) {
      if (input[k].score >= input[i].score && retina::iou(input[k].box, input[i].box) > thresh) {
        covered = true;
      }
    }
    if (!covered) return false;
  }
  return true;
}

std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("retina_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace oracle
