// pointmix - labeled LiDAR frame mixing and dataset tooling
// SPDX-License-Identifier: Apache-2.0

#ifndef POINTMIX_GEOM_HPP
#define POINTMIX_GEOM_HPP

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "pointmix/core.hpp"

namespace pointmix::geom {

struct Vec2 {
  double x = 0, y = 0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

inline Vec2 bev(const Point& p) { return {p.x, p.y}; }
inline Vec2 bev(const Vec3& v) { return {v.x, v.y}; }

/// BEV radial distance from the sensor origin.
inline double bev_range(Vec2 p) { return std::hypot(p.x, p.y); }
inline double bev_range(const Point& p) { return bev_range(bev(p)); }

inline double azimuth(Vec2 p) { return std::atan2(p.y, p.x); }
inline double azimuth(const Point& p) { return azimuth(bev(p)); }

inline Vec2 rotate_about_origin(Vec2 p, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * p.x - s * p.y, s * p.x + c * p.y};
}

/// BEV rectangle; `rotation` is the angle of its local u-axis.
struct BevRect {
  Vec2 center;
  Vec2 half_extent{1, 1};
  double rotation = 0;
};

inline Vec2 to_local(const BevRect& rect, Vec2 p) {
  return rotate_about_origin(p - rect.center, -rect.rotation);
}

/// Boundary-inclusive membership test.
inline bool rect_contains(const BevRect& rect, Vec2 p) {
  const Vec2 uv = to_local(rect, p);
  return std::abs(uv.x) <= rect.half_extent.x && std::abs(uv.y) <= rect.half_extent.y;
}

/// The rectangle after a rigid rotation of the plane about the origin.
inline BevRect rotate_rect(const BevRect& rect, double angle) {
  return {rotate_about_origin(rect.center, angle), rect.half_extent, rect.rotation + angle};
}

inline BevRect box_footprint(const Box3D& b, double margin = 0.0) {
  return {bev(b.center), {0.5 * b.size.x + margin, 0.5 * b.size.y + margin}, b.yaw};
}

using Quad = std::array<Vec2, 4>;

/// Counter-clockwise footprint corners; length runs along the heading.
inline Quad box_bev_polygon(const Box3D& b, double margin = 0.0) {
  const double hl = 0.5 * b.size.x + margin;
  const double hw = 0.5 * b.size.y + margin;
  const Quad local{{{hl, -hw}, {hl, hw}, {-hl, hw}, {-hl, -hw}}};
  Quad out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = rotate_about_origin(local[i], b.yaw) + bev(b.center);
  return out;
}

inline bool box_contains_bev(const Box3D& b, Vec2 p, double margin = 0.0) {
  return rect_contains(box_footprint(b, margin), p);
}

/// 3D containment in the box's local frame, inclusive, widened by `tol` on every face.
inline bool box_contains(const Box3D& b, const Point& p, double tol = 0.0) {
  const Vec2 uv = rotate_about_origin(Vec2{p.x - b.center.x, p.y - b.center.y}, -b.yaw);
  return std::abs(uv.x) <= 0.5 * b.size.x + tol && std::abs(uv.y) <= 0.5 * b.size.y + tol &&
         std::abs(p.z - b.center.z) <= 0.5 * b.size.z + tol;
}

// ---------------------------------------------------------------------------
// Collision
// ---------------------------------------------------------------------------

namespace detail {

inline void project(const Quad& q, Vec2 axis, double& lo, double& hi) {
  lo = std::numeric_limits<double>::infinity();
  hi = -lo;
  for (const auto& v : q) {
    const double d = dot(v, axis);
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
}

inline bool separated_along_edges(const Quad& edges_of, const Quad& a, const Quad& b) {
  // Opposite edges of a rectangle are parallel: two normals suffice.
  for (std::size_t i = 0; i < 2; ++i) {
    const Vec2 e = edges_of[i + 1] - edges_of[i];
    const Vec2 axis{-e.y, e.x};
    double alo, ahi, blo, bhi;
    project(a, axis, alo, ahi);
    project(b, axis, blo, bhi);
    if (ahi <= blo || bhi <= alo) return true;
  }
  return false;
}

}  // namespace detail

inline bool quads_overlap(const Quad& a, const Quad& b) {
  return !detail::separated_along_edges(a, a, b) && !detail::separated_along_edges(b, a, b);
}

/// Separating-axis test on BEV footprints. Zero-area contact is not a collision.
inline bool boxes_collide(const Box3D& a, const Box3D& b, double margin = 0.0) {
  return quads_overlap(box_bev_polygon(a, margin), box_bev_polygon(b, margin));
}

inline double polygon_area(const std::vector<Vec2>& poly) {
  if (poly.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i)
    twice += cross(poly[i], poly[(i + 1) % poly.size()]);
  return 0.5 * std::abs(twice);
}

/// Sutherland-Hodgman: clips `subject` against the convex CCW polygon `clip`.
inline std::vector<Vec2> clip_convex(std::vector<Vec2> subject, const std::vector<Vec2>& clip) {
  for (std::size_t i = 0; i < clip.size() && !subject.empty(); ++i) {
    const Vec2 e0 = clip[i];
    const Vec2 e1 = clip[(i + 1) % clip.size()];
    const Vec2 edge = e1 - e0;
    auto side = [&](Vec2 p) { return cross(edge, p - e0); };

    std::vector<Vec2> out;
    out.reserve(subject.size() + 2);
    for (std::size_t j = 0; j < subject.size(); ++j) {
      const Vec2 cur = subject[j];
      const Vec2 prev = subject[(j + subject.size() - 1) % subject.size()];
      const double sc = side(cur), sp = side(prev);
      if (sc >= 0) {
        if (sp < 0) out.push_back(prev + (sp / (sp - sc)) * (cur - prev));
        out.push_back(cur);
      } else if (sp >= 0) {
        out.push_back(prev + (sp / (sp - sc)) * (cur - prev));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

struct OverlapResult {
  bool collide = false;
  double area = 0.0;
};

/// Independent collision check: exact footprint intersection area by clipping.
inline OverlapResult oracle_boxes_collide(const Box3D& a, const Box3D& b) {
  const Quad qa = box_bev_polygon(a), qb = box_bev_polygon(b);
  const double area =
      polygon_area(clip_convex({qa.begin(), qa.end()}, std::vector<Vec2>(qb.begin(), qb.end())));
  return {area > 0.0, area};
}

}  // namespace pointmix::geom

#endif  // POINTMIX_GEOM_HPP
