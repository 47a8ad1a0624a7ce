#include "retina/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace retina {

Tensor bilinear_resize(const Tensor& image, int width, int height) {
  if (width <= 0 || height <= 0) throw InvalidInput("resize: target size must be positive");
  if (image.rank() != 3) throw InvalidInput("resize: image must be [C,H,W]");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  const auto tw = static_cast<std::size_t>(width);
  const auto th = static_cast<std::size_t>(height);
  if (tw == w && th == h) return image;

  Tensor out({c, th, tw});
  const double sx = static_cast<double>(w) / static_cast<double>(tw);
  const double sy = static_cast<double>(h) / static_cast<double>(th);
  for (std::size_t y = 0; y < th; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0,
                                 static_cast<double>(h - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < tw; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0,
                                   static_cast<double>(w - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = image.at(ch, y0, x0) * (1.0 - wx) + image.at(ch, y0, x1) * wx;
        const double bot = image.at(ch, y1, x0) * (1.0 - wx) + image.at(ch, y1, x1) * wx;
        out.at(ch, y, x) = static_cast<float>(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Tensor preprocess(const Tensor& image, int width, int height) {
  if (width <= 0 || height <= 0) throw InvalidInput("preprocess: target size must be positive");
  if (image.rank() != 3 || image.dim(0) != 3) {
    throw InvalidInput("preprocess: image must be [3,H,W], got " + shape_to_string(image.shape()));
  }
  Tensor norm(image.shape());
  const std::size_t plane = image.dim(1) * image.dim(2);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t i = 0; i < plane; ++i) {
      norm[ch * plane + i] = image[ch * plane + i] / 255.f - kImageNetMean[ch];
    }
  }
  return bilinear_resize(norm, width, height);
}

std::vector<BBox> scale_boxes(std::span<const BBox> boxes, int from_w, int from_h, int to_w,
                              int to_h) {
  if (from_w <= 0 || from_h <= 0 || to_w <= 0 || to_h <= 0) {
    throw InvalidInput("scale_boxes: sizes must be positive");
  }
  std::vector<BBox> out;
  out.reserve(boxes.size());
  if (from_w == to_w && from_h == to_h) {
    out.assign(boxes.begin(), boxes.end());
    return out;
  }
  const double sx = static_cast<double>(to_w) / from_w;
  const double sy = static_cast<double>(to_h) / from_h;
  for (const auto& b : boxes) {
    out.emplace_back(static_cast<float>(b.x1() * sx), static_cast<float>(b.y1() * sy),
                     static_cast<float>(b.x2() * sx), static_cast<float>(b.y2() * sy));
  }
  return out;
}

}  // namespace retina
