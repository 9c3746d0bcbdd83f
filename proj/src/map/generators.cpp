#include "d123/map/generators.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace d123 {

namespace {

std::string padded(const char* prefix, std::size_t i, int width = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, width, i);
  return buf;
}

std::vector<Vec3> closed(std::vector<Vec3> ring) {
  ring.push_back(ring.front());
  return ring;
}

// Counter-clockwise rectangle spanned by a centerline segment a->b and a
// half width; z carried from the endpoints.
std::vector<Vec3> strip(const Vec3& a, const Vec3& b, double half_width) {
  const Vec2 d = (b - a).head<2>().normalized();
  const Vec3 n(-d.y() * half_width, d.x() * half_width, 0.0);
  return closed({a - n, b - n, b + n, a + n});
}

std::vector<Vec3> box(double x0, double y0, double x1, double y1, double z = 0.0) {
  return closed({{x0, y0, z}, {x1, y0, z}, {x1, y1, z}, {x0, y1, z}});
}

MapObject make(std::string id, MapLayer layer, Geometry g, MapAttributes a) {
  return {std::move(id), layer, std::move(g), std::move(a), std::nullopt};
}

}  // namespace

std::vector<MapObject> random_map_objects(std::size_t n, std::uint64_t seed, double extent) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(0.0, extent);
  std::uniform_real_distribution<double> size(0.5, 20.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto layers = all_map_layers();
  std::vector<MapObject> out;
  out.reserve(n);
  std::vector<std::string> lanes;
  for (std::size_t i = 0; i < n; ++i) {
    const MapLayer layer = layers[rng() % layers.size()];
    const bool z = rng() % 2 == 0;
    const double cx = pos(rng), cy = pos(rng), s = size(rng);
    const double zv = z ? unit(rng) * 5.0 : 0.0;
    MapObject o;
    o.id = padded("obj_", i);
    o.layer = layer;
    o.attributes = default_attributes(layer);
    if (layer_is_polygon(layer)) {
      // Star-shaped polygon around the center, sometimes with a hole.
      const int k = 3 + static_cast<int>(rng() % 6);
      std::vector<Vec3> ring;
      for (int j = 0; j < k; ++j) {
        const double a = 2.0 * M_PI * (j + 0.5 * unit(rng)) / k;
        const double r = s * (0.5 + 0.5 * unit(rng));
        ring.emplace_back(cx + r * std::cos(a), cy + r * std::sin(a), zv);
      }
      std::vector<std::vector<Vec3>> rings{closed(ring)};
      if (rng() % 5 == 0) {
        const double h = s * 0.1;
        rings.push_back(closed({{cx - h, cy - h, zv}, {cx - h, cy + h, zv}, {cx + h, cy + h, zv}, {cx + h, cy - h, zv}}));
      }
      o.geometry = Geometry::polygon(rings, z);
    } else {
      const int k = 2 + static_cast<int>(rng() % 5);
      std::vector<Vec3> line;
      double x = cx, y = cy, h = unit(rng) * 2.0 * M_PI;
      for (int j = 0; j < k; ++j) {
        line.emplace_back(x, y, zv);
        h += (unit(rng) - 0.5);
        x += s * std::cos(h);
        y += s * std::sin(h);
      }
      o.geometry = Geometry::linestring(line, z);
    }
    if (layer == MapLayer::lane) {
      LaneAttributes lane;
      lane.centerline = Geometry::linestring({{cx - s / 3, cy, zv}, {cx + s / 3, cy, zv}}, z);
      lane.speed_limit = rng() % 2 ? std::optional<double>(13.9) : std::nullopt;
      if (!lanes.empty() && rng() % 2) lane.predecessors.push_back(lanes[rng() % lanes.size()]);
      o.attributes = lane;
      lanes.push_back(o.id);
    } else if (layer == MapLayer::road_line) {
      o.attributes = RoadLineAttributes{rng() % 2 ? "solid_white" : "dashed_yellow"};
    } else if (layer == MapLayer::road_edge) {
      o.attributes = RoadEdgeAttributes{rng() % 2 == 0};
    } else if (layer == MapLayer::lane_group && !lanes.empty()) {
      o.attributes = LaneGroupAttributes{{lanes.back()}};
    } else if (layer == MapLayer::stop_zone || layer == MapLayer::speed_bump) {
      o.attributes = FreeformAttributes{{{"source", "random"}}};
    }
    if (layer_is_polygon(layer) && rng() % 4 == 0) o.mesh = triangulate_polygon(o.geometry);
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<MapObject> straight_road_map(const RoadMapConfig& c) {
  std::vector<MapObject> out;
  const double half = c.lane_width / 2.0;
  auto lane_id = [](int s, int k) { return "lane_s" + std::to_string(s) + "_l" + std::to_string(k); };
  auto line_id = [](int s, int k) { return "road_line_s" + std::to_string(s) + "_" + std::to_string(k); };
  auto edge_id = [](int s, bool left) { return std::string(left ? "road_edge_left_s" : "road_edge_right_s") + std::to_string(s); };
  for (int s = 0; s < c.segments; ++s) {
    const double x0 = c.origin.x() + s * c.segment_length;
    const double x1 = x0 + c.segment_length;
    LaneGroupAttributes group;
    for (int k = 0; k < c.lanes; ++k) {
      const double y = c.origin.y() + (k + 0.5) * c.lane_width;
      LaneAttributes lane;
      lane.centerline = Geometry::linestring({{x0, y, 0.0}, {x1, y, 0.0}}, false);
      lane.speed_limit = 13.9;
      lane.right_boundary = k == 0 ? edge_id(s, false) : line_id(s, k);
      lane.left_boundary = k == c.lanes - 1 ? edge_id(s, true) : line_id(s, k + 1);
      if (s > 0) lane.predecessors.push_back(lane_id(s - 1, k));
      if (s + 1 < c.segments) lane.successors.push_back(lane_id(s + 1, k));
      if (k + 1 < c.lanes) lane.left_neighbor = lane_id(s, k + 1);
      if (k > 0) lane.right_neighbor = lane_id(s, k - 1);
      out.push_back(make(lane_id(s, k), MapLayer::lane,
                         Geometry::polygon({strip({x0, y, 0.0}, {x1, y, 0.0}, half)}, false), lane));
      group.lane_ids.push_back(lane_id(s, k));
    }
    const double y_top = c.origin.y() + c.lanes * c.lane_width;
    out.push_back(make("lane_group_s" + std::to_string(s), MapLayer::lane_group,
                       Geometry::polygon({box(x0, c.origin.y(), x1, y_top)}, false), group));
    for (int k = 1; k < c.lanes; ++k) {
      const double y = c.origin.y() + k * c.lane_width;
      out.push_back(make(line_id(s, k), MapLayer::road_line, Geometry::linestring({{x0, y, 0}, {x1, y, 0}}, false),
                         RoadLineAttributes{"dashed_white"}));
    }
    out.push_back(make(edge_id(s, false), MapLayer::road_edge,
                       Geometry::linestring({{x0, c.origin.y(), 0}, {x1, c.origin.y(), 0}}, false), RoadEdgeAttributes{false}));
    out.push_back(make(edge_id(s, true), MapLayer::road_edge,
                       Geometry::linestring({{x0, y_top, 0}, {x1, y_top, 0}}, false), RoadEdgeAttributes{false}));
  }
  const double xe = c.origin.x() + c.segments * c.segment_length;
  out.push_back(make("crosswalk_end", MapLayer::crosswalk,
                     Geometry::polygon({box(xe - 4.0, c.origin.y(), xe, c.origin.y() + c.lanes * c.lane_width)}, false),
                     FreeformAttributes{}));
  return out;
}

std::vector<MapObject> grid_map(const GridMapConfig& c) {
  std::vector<MapObject> out;
  const double w = c.lane_width;
  const double road_half = w;  // one lane each way
  const double zv = 0.0;
  auto node_id = [](int i, int j) { return "intersection_" + std::to_string(i) + "_" + std::to_string(j); };
  auto street = [](char axis, int i, int j) { return std::string(1, axis) + std::to_string(i) + "_" + std::to_string(j); };
  const int nx = c.blocks_x + 1, ny = c.blocks_y + 1;
  auto P = [&](double x, double y) { return Vec3(x, y, zv); };

  // Lane ids: lane_<street>_pos runs along +axis, lane_<street>_neg against.
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const double x = i * c.block_size, y = j * c.block_size;
      IntersectionAttributes inter;
      if (i + 1 < nx) inter.lane_group_ids.push_back("lane_group_" + street('x', i, j));
      if (j + 1 < ny) inter.lane_group_ids.push_back("lane_group_" + street('y', i, j));
      out.push_back(make(node_id(i, j), MapLayer::intersection,
                         Geometry::polygon({box(x - road_half, y - road_half, x + road_half, y + road_half, zv)}, c.with_z),
                         inter));
    }
  }
  for (int axis = 0; axis < 2; ++axis) {
    const char a = axis == 0 ? 'x' : 'y';
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        if ((axis == 0 && i + 1 >= nx) || (axis == 1 && j + 1 >= ny)) continue;
        const double x = i * c.block_size, y = j * c.block_size;
        const Vec2 dir = axis == 0 ? Vec2(1, 0) : Vec2(0, 1);
        const Vec2 left(-dir.y(), dir.x());
        const Vec3 s0 = P(x + dir.x() * road_half, y + dir.y() * road_half);
        const Vec3 s1 = P(x + dir.x() * (c.block_size - road_half), y + dir.y() * (c.block_size - road_half));
        const std::string sid = street(a, i, j);
        const int pi = axis == 0 ? i + 1 : i, pj = axis == 0 ? j : j + 1;  // next node
        const int bi = axis == 0 ? i - 1 : i, bj = axis == 0 ? j : j - 1;  // previous street start
        const bool has_next = axis == 0 ? pi + 1 < nx : pj + 1 < ny;
        const bool has_prev = axis == 0 ? bi >= 0 : bj >= 0;
        for (int sign : {1, -1}) {
          const Vec3 off(left.x() * w / 2 * sign, left.y() * w / 2 * sign, 0.0);
          // The positive lane drives along +dir on the right-hand side, so it sits at -left.
          const Vec3 a0 = sign == 1 ? Vec3(s0 - off) : Vec3(s1 + off);
          const Vec3 a1 = sign == 1 ? Vec3(s1 - off) : Vec3(s0 + off);
          LaneAttributes lane;
          lane.centerline = Geometry::linestring({a0, a1}, c.with_z);
          lane.speed_limit = 13.9;
          const std::string me = "lane_" + sid + (sign == 1 ? "_pos" : "_neg");
          const std::string other = "lane_" + sid + (sign == 1 ? "_neg" : "_pos");
          lane.left_neighbor = other;
          lane.left_boundary = "road_line_" + sid;
          lane.right_boundary = "road_edge_" + sid + (sign == 1 ? "_r" : "_l");
          if (sign == 1) {
            if (has_next) lane.successors.push_back("lane_" + street(a, pi, pj) + "_pos");
            if (has_prev) lane.predecessors.push_back("lane_" + street(a, bi, bj) + "_pos");
          } else {
            if (has_prev) lane.successors.push_back("lane_" + street(a, bi, bj) + "_neg");
            if (has_next) lane.predecessors.push_back("lane_" + street(a, pi, pj) + "_neg");
          }
          out.push_back(make(me, MapLayer::lane, Geometry::polygon({strip(a0, a1, w / 2)}, c.with_z), lane));
        }
        out.push_back(make("lane_group_" + sid, MapLayer::lane_group, Geometry::polygon({strip(s0, s1, road_half)}, c.with_z),
                           LaneGroupAttributes{{"lane_" + sid + "_pos"}}));
        out.push_back(make("lane_group_" + sid + "_rev", MapLayer::lane_group,
                           Geometry::polygon({strip(s1, s0, road_half * 0.999)}, c.with_z),
                           LaneGroupAttributes{{"lane_" + sid + "_neg"}}));
        out.push_back(make("road_line_" + sid, MapLayer::road_line, Geometry::linestring({s0, s1}, c.with_z),
                           RoadLineAttributes{"dashed_yellow"}));
        const Vec3 e(left.x() * road_half, left.y() * road_half, 0.0);
        out.push_back(make("road_edge_" + sid + "_r", MapLayer::road_edge, Geometry::linestring({s0 - e, s1 - e}, c.with_z),
                           RoadEdgeAttributes{false}));
        out.push_back(make("road_edge_" + sid + "_l", MapLayer::road_edge, Geometry::linestring({s0 + e, s1 + e}, c.with_z),
                           RoadEdgeAttributes{false}));
        // Crosswalk at the start of each street, sidewalk strips along both sides.
        const Vec3 cw1 = s0 + P(dir.x() * 3.0, dir.y() * 3.0) - P(0, 0);
        out.push_back(make("crosswalk_" + sid, MapLayer::crosswalk, Geometry::polygon({strip(s0, cw1, road_half)}, c.with_z),
                           FreeformAttributes{}));
        const Vec3 side(left.x() * (road_half + 1.0), left.y() * (road_half + 1.0), 0.0);
        out.push_back(make("walkway_" + sid + "_l", MapLayer::walkway, Geometry::polygon({strip(s0 + side, s1 + side, 1.0)}, c.with_z),
                           FreeformAttributes{}));
        out.push_back(make("walkway_" + sid + "_r", MapLayer::walkway, Geometry::polygon({strip(s0 - side, s1 - side, 1.0)}, c.with_z),
                           FreeformAttributes{}));
      }
    }
  }
  for (int i = 0; i < c.blocks_x; ++i) {
    for (int j = 0; j < c.blocks_y; ++j) {
      if ((i + j) % 3 != 0) continue;
      const double x = i * c.block_size + c.block_size / 2, y = j * c.block_size + c.block_size / 2;
      out.push_back(make("carpark_" + std::to_string(i) + "_" + std::to_string(j), MapLayer::carpark,
                         Geometry::polygon({box(x - 15, y - 10, x + 15, y + 10, zv)}, c.with_z), FreeformAttributes{}));
    }
  }
  return out;
}

}  // namespace d123
