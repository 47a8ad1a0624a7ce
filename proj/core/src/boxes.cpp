#include "retina/boxes.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "retina/errors.hpp"

namespace retina {

BBox::BBox(float x1, float y1, float x2, float y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!std::isfinite(x1) || !std::isfinite(y1) || !std::isfinite(x2) || !std::isfinite(y2)) {
    throw InvalidInput("box has non-finite coordinates");
  }
  if (x1 > x2 || y1 > y2) {
    throw InvalidInput("box corners inverted: (" + std::to_string(x1) + ", " +
                       std::to_string(y1) + ", " + std::to_string(x2) + ", " +
                       std::to_string(y2) + ")");
  }
}

AffineTransform::AffineTransform(double a, double b, double c, double d, double e, double f)
    : m_{a, b, c, d, e, f} {
  for (double v : m_) {
    if (!std::isfinite(v)) throw InvalidInput("affine transform has non-finite entries");
  }
}

AffineTransform AffineTransform::translation(double dx, double dy) {
  return {1.0, 0.0, dx, 0.0, 1.0, dy};
}

AffineTransform AffineTransform::rotation(double radians, double cx, double cy) {
  const double c = std::cos(radians);
  const double s = std::sin(radians);
  // p' = R (p - center) + center
  return {c, -s, cx - c * cx + s * cy, s, c, cy - s * cx - c * cy};
}

AffineTransform AffineTransform::scaling(double s, double cx, double cy) {
  return {s, 0.0, cx - s * cx, 0.0, s, cy - s * cy};
}

AffineTransform AffineTransform::horizontal_flip(double width) {
  return {-1.0, 0.0, width, 0.0, 1.0, 0.0};
}

AffineTransform AffineTransform::then(const AffineTransform& next) const {
  const auto& p = m_;
  const auto& q = next.m_;
  return {q[0] * p[0] + q[1] * p[3],        q[0] * p[1] + q[1] * p[4],
          q[0] * p[2] + q[1] * p[5] + q[2], q[3] * p[0] + q[4] * p[3],
          q[3] * p[1] + q[4] * p[4],        q[3] * p[2] + q[4] * p[5] + q[5]};
}

AffineTransform AffineTransform::inverse() const {
  const auto& m = m_;
  const double det = m[0] * m[4] - m[1] * m[3];
  if (det == 0.0) throw InvalidInput("affine transform is singular");
  const double ia = m[4] / det;
  const double ib = -m[1] / det;
  const double id = -m[3] / det;
  const double ie = m[0] / det;
  return {ia, ib, -(ia * m[2] + ib * m[5]), id, ie, -(id * m[2] + ie * m[5])};
}

float iou(const BBox& a, const BBox& b) noexcept {
  const double iw = std::max(0.0, static_cast<double>(std::min(a.x2(), b.x2())) -
                                      std::max(a.x1(), b.x1()));
  const double ih = std::max(0.0, static_cast<double>(std::min(a.y2(), b.y2())) -
                                      std::max(a.y1(), b.y1()));
  const double inter = iw * ih;
  const double area_a = static_cast<double>(a.width()) * a.height();
  const double area_b = static_cast<double>(b.width()) * b.height();
  const double uni = area_a + area_b - inter;
  if (uni <= 0.0) return 0.f;
  return static_cast<float>(std::clamp(inter / uni, 0.0, 1.0));
}

IouMatrix iou_matrix(std::span<const BBox> as, std::span<const BBox> bs) {
  IouMatrix out{as.size(), bs.size(), std::vector<float>(as.size() * bs.size())};
  for (std::size_t i = 0; i < as.size(); ++i) {
    for (std::size_t j = 0; j < bs.size(); ++j) {
      out.values[i * bs.size() + j] = iou(as[i], bs[j]);
    }
  }
  return out;
}

BoxDelta encode(const BBox& gt, const BBox& anchor) {
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double gw = gt.width();
  const double gh = gt.height();
  if (!(aw > 0.0 && ah > 0.0)) throw InvalidInput("encode: degenerate anchor");
  if (!(gw > 0.0 && gh > 0.0)) throw InvalidInput("encode: degenerate ground-truth box");
  const double ax = anchor.x1() + 0.5 * aw;
  const double ay = anchor.y1() + 0.5 * ah;
  const double gx = gt.x1() + 0.5 * gw;
  const double gy = gt.y1() + 0.5 * gh;
  return {static_cast<float>((gx - ax) / aw), static_cast<float>((gy - ay) / ah),
          static_cast<float>(std::log(gw / aw)), static_cast<float>(std::log(gh / ah))};
}

BBox decode(const BBox& anchor, const BoxDelta& delta) {
  const double aw = anchor.width();
  const double ah = anchor.height();
  const double ax = anchor.x1() + 0.5 * aw;
  const double ay = anchor.y1() + 0.5 * ah;
  const double cx = ax + static_cast<double>(delta.tx) * aw;
  const double cy = ay + static_cast<double>(delta.ty) * ah;
  const double w = aw * std::exp(std::min(static_cast<double>(delta.tw), double{kMaxLogScale}));
  const double h = ah * std::exp(std::min(static_cast<double>(delta.th), double{kMaxLogScale}));
  return {static_cast<float>(cx - 0.5 * w), static_cast<float>(cy - 0.5 * h),
          static_cast<float>(cx + 0.5 * w), static_cast<float>(cy + 0.5 * h)};
}

BBox clip_to_image(const BBox& box, float width, float height) {
  return {std::clamp(box.x1(), 0.f, width), std::clamp(box.y1(), 0.f, height),
          std::clamp(box.x2(), 0.f, width), std::clamp(box.y2(), 0.f, height)};
}

BBox transform_box(const BBox& box, const AffineTransform& t) {
  const std::array<std::array<double, 2>, 4> corners{{
      t.apply(box.x1(), box.y1()),
      t.apply(box.x2(), box.y1()),
      t.apply(box.x1(), box.y2()),
      t.apply(box.x2(), box.y2()),
  }};
  double x1 = corners[0][0], x2 = x1, y1 = corners[0][1], y2 = y1;
  for (const auto& c : corners) {
    x1 = std::min(x1, c[0]);
    x2 = std::max(x2, c[0]);
    y1 = std::min(y1, c[1]);
    y2 = std::max(y2, c[1]);
  }
  return {static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x2),
          static_cast<float>(y2)};
}

}  // namespace retina
