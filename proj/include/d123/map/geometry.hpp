#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "d123/geom/se3.hpp"

namespace d123 {

/// Axis-aligned rectangle in the xy-plane. Default-constructed is empty.
struct Rect {
  double min_x = 1.0, min_y = 1.0, max_x = 0.0, max_y = 0.0;

  static Rect around(const Vec2& c, double r) { return {c.x() - r, c.y() - r, c.x() + r, c.y() + r}; }

  bool empty() const { return min_x > max_x || min_y > max_y; }
  bool intersects(const Rect& o) const {
    return !empty() && !o.empty() && min_x <= o.max_x && o.min_x <= max_x && min_y <= o.max_y && o.min_y <= max_y;
  }
  bool contains(const Rect& o) const {
    return o.empty() || (!empty() && min_x <= o.min_x && min_y <= o.min_y && o.max_x <= max_x && o.max_y <= max_y);
  }
  bool contains(const Vec2& p) const { return min_x <= p.x() && p.x() <= max_x && min_y <= p.y() && p.y() <= max_y; }
  void expand(const Rect& o);
  void expand(double x, double y);
  Vec2 center() const { return {(min_x + max_x) / 2, (min_y + max_y) / 2}; }
  /// Euclidean distance from p to the rectangle, 0 inside.
  double distance(const Vec2& p) const;

  bool operator==(const Rect&) const = default;
};

enum class GeometryKind { point, linestring, polygon };

/// Point, linestring or polygon with optional z. 2D geometries keep z = 0.
/// Polygon rings are closed; the first ring is the outer boundary.
struct Geometry {
  GeometryKind kind = GeometryKind::point;
  bool has_z = false;
  std::vector<std::vector<Vec3>> rings;

  static Geometry point(const Vec3& p, bool has_z);
  static Geometry linestring(std::vector<Vec3> points, bool has_z);
  static Geometry polygon(std::vector<std::vector<Vec3>> rings, bool has_z);

  /// Throws InvalidArgument on open rings, short linestrings, non-finite
  /// coordinates or nonzero z on 2D geometries.
  void validate() const;

  const std::vector<Vec3>& coords() const { return rings.front(); }
  Rect bbox() const;

  bool operator==(const Geometry&) const = default;
};

/// ISO WKB, little-endian, Z variants as base type + 1000.
std::vector<std::uint8_t> wkb_encode(const Geometry& g);
/// Accepts either byte order. Throws MalformedWkb.
Geometry wkb_decode(std::span<const std::uint8_t> bytes);

/// Minimum xy-plane distance from p to the geometry; 0 inside polygons.
double distance_xy(const Geometry& g, const Vec2& p);
/// Exact xy-plane intersection test against a closed rectangle.
bool intersects(const Geometry& g, const Rect& r);
/// Even-odd containment in a closed ring, boundary counts as inside.
bool point_in_ring(const std::vector<Vec3>& ring, const Vec2& p);

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

}  // namespace d123
