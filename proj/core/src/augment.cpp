#include "retina/augment.hpp"

#include <cmath>
#include <numbers>

namespace retina {

AugmentConfig AugmentConfig::identity() {
  AugmentConfig c;
  c.translate_frac = 0.f;
  c.max_rot_deg = 0.f;
  c.scale_min = 1.f;
  c.scale_max = 1.f;
  c.hflip_prob = 0.f;
  return c;
}

void AugmentConfig::validate() const {
  if (!(translate_frac >= 0.f && translate_frac < 1.f)) {
    throw InvalidInput("augment: translate_frac must be in [0, 1)");
  }
  if (!(max_rot_deg >= 0.f)) throw InvalidInput("augment: max_rot_deg must be >= 0");
  if (!(scale_min > 0.f && scale_min <= scale_max)) {
    throw InvalidInput("augment: require 0 < scale_min <= scale_max");
  }
  if (!(hflip_prob >= 0.f && hflip_prob <= 1.f)) {
    throw InvalidInput("augment: hflip_prob must be in [0, 1]");
  }
  if (!(min_box_area_px >= 0.f)) throw InvalidInput("augment: min_box_area_px must be >= 0");
  if (!(min_visible_frac >= 0.f && min_visible_frac <= 1.f)) {
    throw InvalidInput("augment: min_visible_frac must be in [0, 1]");
  }
}

AffineTransform sample_augmentation(const AugmentConfig& config, int width, int height, Rng& rng) {
  // Fixed draw order: flip, angle, scale, dx, dy.
  const bool flip = config.hflip_prob > 0.f && rng.bernoulli(config.hflip_prob);
  const double deg = rng.uniform(-config.max_rot_deg, config.max_rot_deg);
  const double scale = rng.uniform(config.scale_min, config.scale_max);
  const double tx = config.translate_frac * width;
  const double ty = config.translate_frac * height;
  const double dx = rng.uniform(-tx, tx);
  const double dy = rng.uniform(-ty, ty);

  const double cx = 0.5 * width;
  const double cy = 0.5 * height;
  auto t = AffineTransform::translation(dx, dy)
               .then(AffineTransform::scaling(scale, cx, cy))
               .then(AffineTransform::rotation(deg * std::numbers::pi / 180.0, cx, cy));
  if (flip) t = t.then(AffineTransform::horizontal_flip(width));
  return t;
}

AugmentResult apply_augmentation(const Tensor& image, std::span<const BBox> boxes,
                                 const AffineTransform& transform, const AugmentConfig& config) {
  if (image.rank() != 3) throw InvalidInput("augment: image must be [C,H,W]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto inv = transform.inverse();

  AugmentResult out;
  out.image = Tensor(image.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      // Pixel centres live at integer + 0.5.
      const auto src = inv.apply(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5);
      const double fx = src[0] - 0.5;
      const double fy = src[1] - 0.5;
      const double x0f = std::floor(fx);
      const double y0f = std::floor(fy);
      const double wx = fx - x0f;
      const double wy = fy - y0f;
      const auto x0 = static_cast<std::ptrdiff_t>(x0f);
      const auto y0 = static_cast<std::ptrdiff_t>(y0f);
      const auto sample = [&](std::size_t ch, std::ptrdiff_t yy, std::ptrdiff_t xx) -> double {
        if (xx < 0 || yy < 0 || xx >= static_cast<std::ptrdiff_t>(w) ||
            yy >= static_cast<std::ptrdiff_t>(h)) {
          return 0.0;
        }
        return image.at(ch, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
      };
      for (std::size_t ch = 0; ch < c; ++ch) {
        double v;
        if (wx == 0.0 && wy == 0.0) {
          v = sample(ch, y0, x0);
        } else {
          v = (sample(ch, y0, x0) * (1.0 - wx) + sample(ch, y0, x0 + 1) * wx) * (1.0 - wy) +
              (sample(ch, y0 + 1, x0) * (1.0 - wx) + sample(ch, y0 + 1, x0 + 1) * wx) * wy;
        }
        out.image.at(ch, y, x) = static_cast<float>(v);
      }
    }
  }

  const auto fw = static_cast<float>(w);
  const auto fh = static_cast<float>(h);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const BBox moved = transform_box(boxes[i], transform);
    const BBox clipped = clip_to_image(moved, fw, fh);
    const double full = static_cast<double>(moved.width()) * moved.height();
    const double vis = static_cast<double>(clipped.width()) * clipped.height();
    if (!(vis > 0.0) || vis < config.min_box_area_px) continue;
    if (full > 0.0 && vis / full < config.min_visible_frac) continue;
    out.boxes.push_back(clipped);
    out.kept.push_back(i);
  }
  return out;
}

AugmentResult augment(const Tensor& image, std::span<const BBox> boxes,
                      const AugmentConfig& config, Rng& rng) {
  if (image.rank() != 3) throw InvalidInput("augment: image must be [C,H,W]");
  const auto t = sample_augmentation(config, static_cast<int>(image.dim(2)),
                                     static_cast<int>(image.dim(1)), rng);
  return apply_augmentation(image, boxes, t, config);
}

}  // namespace retina
