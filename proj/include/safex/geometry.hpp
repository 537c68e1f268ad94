#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <variant>
#include <vector>

namespace safex {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Euclidean distance in meters.
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

inline Vec2 unit_from_heading(double heading) { return {std::cos(heading), std::sin(heading)}; }

/// Wraps an angle into [-pi, pi].
inline double normalize_angle(double a) {
  if (!std::isfinite(a)) return a;
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

struct Disc {
  double radius = 0.0;
  friend bool operator==(const Disc&, const Disc&) = default;
};

/// Convex polygon, vertices in counter-clockwise or clockwise order, in the
/// occluder's local frame (offset by the occluder position).
struct Polygon {
  std::vector<Vec2> vertices;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

using Shape = std::variant<Disc, Polygon>;

inline double signed_area(const Polygon& p) {
  double a = 0.0;
  const auto n = p.vertices.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(p.vertices[i], p.vertices[(i + 1) % n]);
  return 0.5 * a;
}

inline bool is_convex(const Polygon& p) {
  const auto n = p.vertices.size();
  if (n < 3) return false;
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 e0 = p.vertices[(i + 1) % n] - p.vertices[i];
    const Vec2 e1 = p.vertices[(i + 2) % n] - p.vertices[(i + 1) % n];
    const double c = cross(e0, e1);
    if (c == 0.0) continue;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return sign != 0;
}

inline double area(const Shape& s) {
  if (const auto* d = std::get_if<Disc>(&s)) return std::numbers::pi * d->radius * d->radius;
  return std::abs(signed_area(std::get<Polygon>(s)));
}

/// True iff the closed segment [a, b] touches the disc of `radius` centred at `center`.
inline bool segment_hits_disc(Vec2 a, Vec2 b, Vec2 center, double radius) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(center - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec2 closest = a + t * ab;
  return distance(closest, center) <= radius;
}

/// Cyrus-Beck clip of segment [a, b] against a convex polygon placed at `offset`.
inline bool segment_hits_convex(Vec2 a, Vec2 b, const Polygon& poly, Vec2 offset) {
  const auto n = poly.vertices.size();
  const double orient = signed_area(poly) >= 0.0 ? 1.0 : -1.0;
  const Vec2 d = b - a;
  double t_enter = 0.0;
  double t_exit = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 p0 = poly.vertices[i] + offset;
    const Vec2 p1 = poly.vertices[(i + 1) % n] + offset;
    const Vec2 edge = p1 - p0;
    // Outward normal for the polygon's winding.
    const Vec2 outward = orient > 0 ? Vec2{edge.y, -edge.x} : Vec2{-edge.y, edge.x};
    const double num = dot(outward, a - p0);  // > 0 : a is outside this edge
    const double den = dot(outward, d);
    if (den == 0.0) {
      if (num > 0.0) return false;
      continue;
    }
    const double t = -num / den;
    if (den < 0.0) t_enter = std::max(t_enter, t);
    else t_exit = std::min(t_exit, t);
    if (t_enter > t_exit) return false;
  }
  return true;
}

inline bool segment_hits(Vec2 a, Vec2 b, const Shape& shape, Vec2 offset) {
  if (const auto* d = std::get_if<Disc>(&shape)) return segment_hits_disc(a, b, offset, d->radius);
  return segment_hits_convex(a, b, std::get<Polygon>(shape), offset);
}

}  // namespace safex
