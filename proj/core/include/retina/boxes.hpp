#pragma once

#include <array>
#include <span>
#include <vector>

namespace retina {

/// Axis-aligned box with real-valued corners in pixel coordinates.
/// Construction rejects inverted or non-finite corners.
class BBox {
 public:
  constexpr BBox() = default;
  BBox(float x1, float y1, float x2, float y2);

  float x1() const noexcept { return x1_; }
  float y1() const noexcept { return y1_; }
  float x2() const noexcept { return x2_; }
  float y2() const noexcept { return y2_; }

  float width() const noexcept { return x2_ - x1_; }
  float height() const noexcept { return y2_ - y1_; }
  float area() const noexcept { return width() * height(); }
  float center_x() const noexcept { return 0.5f * (x1_ + x2_); }
  float center_y() const noexcept { return 0.5f * (y1_ + y2_); }

  std::array<float, 4> corners() const noexcept { return {x1_, y1_, x2_, y2_}; }

  bool operator==(const BBox&) const = default;

 private:
  float x1_ = 0.f;
  float y1_ = 0.f;
  float x2_ = 0.f;
  float y2_ = 0.f;
};

/// Anchor-relative regression offsets: center shift in anchor units and
/// log-space size ratios.
struct BoxDelta {
  float tx = 0.f;
  float ty = 0.f;
  float tw = 0.f;
  float th = 0.f;

  bool operator==(const BoxDelta&) const = default;
};

/// Upper bound applied to tw/th before exponentiation in decode().
inline constexpr float kMaxLogScale = 4.135166556742356f;  // ln(1000 / 16)

/// 2x3 matrix mapping (x, y) to (a*x + b*y + c, d*x + e*y + f).
class AffineTransform {
 public:
  constexpr AffineTransform() = default;
  AffineTransform(double a, double b, double c, double d, double e, double f);

  static AffineTransform identity() { return {}; }
  static AffineTransform translation(double dx, double dy);
  /// Rotation matrix [cos -sin; sin cos] about (cx, cy).
  static AffineTransform rotation(double radians, double cx = 0.0, double cy = 0.0);
  static AffineTransform scaling(double s, double cx = 0.0, double cy = 0.0);
  /// x -> width - x.
  static AffineTransform horizontal_flip(double width);

  /// Returns the transform that applies `*this` first, then `next`.
  AffineTransform then(const AffineTransform& next) const;
  AffineTransform inverse() const;

  std::array<double, 2> apply(double x, double y) const noexcept {
    return {m_[0] * x + m_[1] * y + m_[2], m_[3] * x + m_[4] * y + m_[5]};
  }

  const std::array<double, 6>& matrix() const noexcept { return m_; }

 private:
  std::array<double, 6> m_{1.0, 0.0, 0.0, 0.0, 1.0, 0.0};
};

float iou(const BBox& a, const BBox& b) noexcept;

/// Row-major [as.size() x bs.size()] matrix of pairwise IoU.
struct IouMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  float operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
};

IouMatrix iou_matrix(std::span<const BBox> as, std::span<const BBox> bs);

BoxDelta encode(const BBox& gt, const BBox& anchor);
BBox decode(const BBox& anchor, const BoxDelta& delta);

BBox clip_to_image(const BBox& box, float width, float height);

/// Axis-aligned envelope of the four transformed corners.
BBox transform_box(const BBox& box, const AffineTransform& t);

}  // namespace retina
