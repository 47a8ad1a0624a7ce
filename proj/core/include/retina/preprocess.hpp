#pragma once

#include <array>
#include <span>
#include <vector>

#include "retina/boxes.hpp"
#include "retina/tensor.hpp"

namespace retina {

inline constexpr std::array<float, 3> kImageNetMean{0.485f, 0.456f, 0.406f};

/// Half-pixel-centred bilinear resize of a [C,H,W] tensor.
Tensor bilinear_resize(const Tensor& image, int width, int height);

/// [0,255] image -> divide by 255 -> subtract the ImageNet channel mean ->
/// bilinear resize to (width, height).
Tensor preprocess(const Tensor& image, int width, int height);

/// Rescales boxes from a (from_w, from_h) image to (to_w, to_h).
std::vector<BBox> scale_boxes(std::span<const BBox> boxes, int from_w, int from_h, int to_w,
                              int to_h);

}  // namespace retina
