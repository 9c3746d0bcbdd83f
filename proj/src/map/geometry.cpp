#include "d123/map/geometry.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "d123/error.hpp"

namespace d123 {

void Rect::expand(const Rect& o) {
  if (o.empty()) return;
  if (empty()) {
    *this = o;
    return;
  }
  min_x = std::min(min_x, o.min_x);
  min_y = std::min(min_y, o.min_y);
  max_x = std::max(max_x, o.max_x);
  max_y = std::max(max_y, o.max_y);
}

void Rect::expand(double x, double y) { expand(Rect{x, y, x, y}); }

double Rect::distance(const Vec2& p) const {
  const double dx = std::max({min_x - p.x(), 0.0, p.x() - max_x});
  const double dy = std::max({min_y - p.y(), 0.0, p.y() - max_y});
  return std::hypot(dx, dy);
}

Geometry Geometry::point(const Vec3& p, bool has_z) {
  Geometry g{GeometryKind::point, has_z, {{p}}};
  g.validate();
  return g;
}

Geometry Geometry::linestring(std::vector<Vec3> points, bool has_z) {
  Geometry g{GeometryKind::linestring, has_z, {std::move(points)}};
  g.validate();
  return g;
}

Geometry Geometry::polygon(std::vector<std::vector<Vec3>> rings, bool has_z) {
  Geometry g{GeometryKind::polygon, has_z, std::move(rings)};
  g.validate();
  return g;
}

namespace {

std::string check_geometry(const Geometry& g) {
  if (g.rings.empty()) return "geometry has no coordinates";
  for (const auto& ring : g.rings) {
    for (const auto& p : ring) {
      if (!p.allFinite()) return "non-finite coordinate";
      if (!g.has_z && p.z() != 0.0) return "2D geometry with nonzero z";
    }
  }
  switch (g.kind) {
    case GeometryKind::point:
      if (g.rings.size() != 1 || g.rings[0].size() != 1) return "point must hold exactly one coordinate";
      break;
    case GeometryKind::linestring:
      if (g.rings.size() != 1 || g.rings[0].size() < 2) return "linestring needs at least 2 vertices";
      break;
    case GeometryKind::polygon:
      for (const auto& ring : g.rings) {
        if (ring.size() < 4) return "polygon ring needs at least 4 vertices";
        if (ring.front() != ring.back()) return "polygon ring is not closed";
      }
      break;
  }
  return {};
}

}  // namespace

void Geometry::validate() const {
  const auto why = check_geometry(*this);
  if (!why.empty()) throw Error(ErrorCode::invalid_argument, why);
}

Rect Geometry::bbox() const {
  Rect r;
  for (const auto& ring : rings) {
    for (const auto& p : ring) r.expand(p.x(), p.y());
  }
  return r;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

void put_coords(std::vector<std::uint8_t>& out, const std::vector<Vec3>& pts, bool z) {
  for (const auto& p : pts) {
    put_f64(out, p.x());
    put_f64(out, p.y());
    if (z) put_f64(out, p.z());
  }
}

class WkbReader {
 public:
  explicit WkbReader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint8_t byte() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      const std::uint32_t byte = b_[pos_ + static_cast<std::size_t>(big_ ? 3 - i : i)];
      v |= byte << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      const std::uint64_t byte = b_[pos_ + static_cast<std::size_t>(big_ ? 7 - i : i)];
      v |= byte << (8 * i);
    }
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::size_t count(std::size_t item_size) {
    const std::uint32_t n = u32();
    // Reject counts the remaining buffer cannot hold before allocating.
    if (static_cast<std::uint64_t>(n) * item_size > b_.size() - pos_) fail("count exceeds buffer");
    return n;
  }
  std::vector<Vec3> coords(std::size_t n, bool z) {
    std::vector<Vec3> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = f64();
      const double y = f64();
      out.emplace_back(x, y, z ? f64() : 0.0);
    }
    return out;
  }
  void set_order(std::uint8_t order) {
    if (order > 1) fail("bad byte-order marker " + std::to_string(order));
    big_ = order == 0;
  }
  bool done() const { return pos_ == b_.size(); }
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::malformed_wkb, why + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) fail("truncated buffer");
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
  bool big_ = false;
};

}  // namespace

std::vector<std::uint8_t> wkb_encode(const Geometry& g) {
  g.validate();
  std::vector<std::uint8_t> out;
  out.push_back(1);
  const std::uint32_t base = g.kind == GeometryKind::point ? 1 : g.kind == GeometryKind::linestring ? 2 : 3;
  put_u32(out, base + (g.has_z ? 1000 : 0));
  switch (g.kind) {
    case GeometryKind::point:
      put_coords(out, g.rings[0], g.has_z);
      break;
    case GeometryKind::linestring:
      put_u32(out, static_cast<std::uint32_t>(g.rings[0].size()));
      put_coords(out, g.rings[0], g.has_z);
      break;
    case GeometryKind::polygon:
      put_u32(out, static_cast<std::uint32_t>(g.rings.size()));
      for (const auto& ring : g.rings) {
        put_u32(out, static_cast<std::uint32_t>(ring.size()));
        put_coords(out, ring, g.has_z);
      }
      break;
  }
  return out;
}

Geometry wkb_decode(std::span<const std::uint8_t> bytes) {
  WkbReader in(bytes);
  in.set_order(in.byte());
  const std::uint32_t type = in.u32();
  Geometry g;
  g.has_z = type > 1000;
  const std::uint32_t base = g.has_z ? type - 1000 : type;
  if (base < 1 || base > 3 || (type > 3 && !g.has_z) || type > 1003) in.fail("unsupported geometry type " + std::to_string(type));
  const std::size_t coord_size = g.has_z ? 24 : 16;
  if (base == 1) {
    g.kind = GeometryKind::point;
    g.rings.push_back(in.coords(1, g.has_z));
  } else if (base == 2) {
    g.kind = GeometryKind::linestring;
    const auto n = in.count(coord_size);
    g.rings.push_back(in.coords(n, g.has_z));
  } else {
    g.kind = GeometryKind::polygon;
    const auto rings = in.count(4);
    for (std::size_t r = 0; r < rings; ++r) {
      const auto n = in.count(coord_size);
      g.rings.push_back(in.coords(n, g.has_z));
    }
  }
  if (!in.done()) in.fail("trailing bytes");
  const auto why = check_geometry(g);
  if (!why.empty()) throw Error(ErrorCode::malformed_wkb, why);
  return g;
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

bool point_in_ring(const std::vector<Vec3>& ring, const Vec2& p) {
  bool inside = false;
  for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
    const Vec2 a = ring[i].head<2>(), b = ring[j].head<2>();
    if (segment_distance(p, a, b) == 0.0) return true;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

namespace {

double ring_distance(const std::vector<Vec3>& ring, const Vec2& p) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    best = std::min(best, segment_distance(p, ring[i].head<2>(), ring[i + 1].head<2>()));
  }
  return best;
}

bool inside_polygon(const Geometry& g, const Vec2& p) {
  if (!point_in_ring(g.rings[0], p)) return false;
  for (std::size_t h = 1; h < g.rings.size(); ++h) {
    // On a hole's boundary still counts as inside.
    if (point_in_ring(g.rings[h], p) && ring_distance(g.rings[h], p) > 0.0) return false;
  }
  return true;
}

// Liang-Barsky clip of segment ab against r.
bool segment_hits_rect(const Vec2& a, const Vec2& b, const Rect& r) {
  double t0 = 0.0, t1 = 1.0;
  const double dx = b.x() - a.x(), dy = b.y() - a.y();
  const double p[4] = {-dx, dx, -dy, dy};
  const double q[4] = {a.x() - r.min_x, r.max_x - a.x(), a.y() - r.min_y, r.max_y - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
    } else {
      const double t = q[i] / p[i];
      if (p[i] < 0.0) {
        t0 = std::max(t0, t);
      } else {
        t1 = std::min(t1, t);
      }
      if (t0 > t1) return false;
    }
  }
  return true;
}

}  // namespace

double distance_xy(const Geometry& g, const Vec2& p) {
  switch (g.kind) {
    case GeometryKind::point:
      return (g.rings[0][0].head<2>() - p).norm();
    case GeometryKind::linestring:
      return ring_distance(g.rings[0], p);
    case GeometryKind::polygon: {
      if (inside_polygon(g, p)) return 0.0;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& ring : g.rings) best = std::min(best, ring_distance(ring, p));
      return best;
    }
  }
  return std::numeric_limits<double>::infinity();
}

bool intersects(const Geometry& g, const Rect& r) {
  if (r.empty() || !g.bbox().intersects(r)) return false;
  if (g.kind == GeometryKind::point) return r.contains(Vec2(g.rings[0][0].head<2>()));
  for (const auto& ring : g.rings) {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      if (segment_hits_rect(ring[i].head<2>(), ring[i + 1].head<2>(), r)) return true;
    }
  }
  // Rectangle entirely inside the polygon interior.
  return g.kind == GeometryKind::polygon && inside_polygon(g, r.center());
}

}  // namespace d123
