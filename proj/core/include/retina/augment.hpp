#pragma once

#include <span>
#include <vector>

#include "retina/boxes.hpp"
#include "retina/rng.hpp"
#include "retina/tensor.hpp"

namespace retina {

struct AugmentConfig {
  float translate_frac = 0.10f;
  float max_rot_deg = 5.0f;
  float scale_min = 0.9f;
  float scale_max = 1.1f;
  float hflip_prob = 0.5f;
  float min_box_area_px = 16.f;
  float min_visible_frac = 0.4f;

  /// Every range collapsed at the identity and flipping disabled.
  static AugmentConfig identity();

  void validate() const;
  bool operator==(const AugmentConfig&) const = default;
};

struct AugmentResult {
  Tensor image;
  std::vector<BBox> boxes;
  /// Index into the input box list for each surviving box.
  std::vector<std::size_t> kept;
};

/// Draws flip, rotation and scale about the image centre, then translation.
/// The returned transform maps input pixel coordinates to output ones.
AffineTransform sample_augmentation(const AugmentConfig& config, int width, int height, Rng& rng);

/// Warps [C,H,W] `image` by inverse mapping with bilinear sampling and zero
/// fill, moves boxes through transform_box + clip_to_image and drops boxes
/// that fall below the area or visibility floors.
AugmentResult apply_augmentation(const Tensor& image, std::span<const BBox> boxes,
                                 const AffineTransform& transform, const AugmentConfig& config);

AugmentResult augment(const Tensor& image, std::span<const BBox> boxes,
                      const AugmentConfig& config, Rng& rng);

}  // namespace retina
