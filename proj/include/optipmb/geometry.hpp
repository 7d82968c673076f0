#pragma once

#include "optipmb/common.hpp"

#include <array>
#include <vector>

namespace optipmb {

/// Oriented rectangle on the ground plane. Length runs along the heading.
struct BevBox {
  Vector2 center = Vector2::Zero();
  double length = 1.0;
  double width = 1.0;
  double yaw = 0.0;

  /// Counter-clockwise corners.
  [[nodiscard]] std::array<Vector2, 4> corners() const {
    const Vector2 ax(std::cos(yaw), std::sin(yaw));
    const Vector2 ay(-ax.y(), ax.x());
    const Vector2 hl = 0.5 * length * ax;
    const Vector2 hw = 0.5 * width * ay;
    return {center - hl - hw, center + hl - hw, center + hl + hw, center - hl + hw};
  }

  [[nodiscard]] double area() const { return length * width; }
};

namespace detail {

inline double cross(const Vector2& a, const Vector2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline double polygon_area(const std::vector<Vector2>& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) twice += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * std::abs(twice);
}

/// Sutherland-Hodgman: clips `subject` against the convex CCW polygon `clip`.
inline std::vector<Vector2> clip_polygon(std::vector<Vector2> subject, const std::array<Vector2, 4>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vector2& a = clip[e];
    const Vector2& b = clip[(e + 1) % clip.size()];
    const Vector2 edge = b - a;
    auto side = [&](const Vector2& p) { return cross(edge, p - a); };

    std::vector<Vector2> out;
    out.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vector2& p = subject[i];
      const Vector2& q = subject[(i + 1) % subject.size()];
      const double sp = side(p);
      const double sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace detail

inline double bev_intersection_area(const BevBox& a, const BevBox& b) {
  const auto ca = a.corners();
  const auto poly = detail::clip_polygon({ca.begin(), ca.end()}, b.corners());
  return poly.size() < 3 ? 0.0 : detail::polygon_area(poly);
}

/// Intersection over union of two oriented rectangles.
inline double bev_iou(const BevBox& a, const BevBox& b) {
  const double inter = bev_intersection_area(a, b);
  const double uni = a.area() + b.area() - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

}  // namespace optipmb
