#include "d123/map/map_object.hpp"

#include <cstring>
#include <limits>

#include "d123/error.hpp"

namespace d123 {

namespace {

constexpr std::array<std::pair<MapLayer, std::string_view>, kNumMapLayers> kLayerNames = {{
    {MapLayer::lane, "lane"},
    {MapLayer::lane_group, "lane_group"},
    {MapLayer::intersection, "intersection"},
    {MapLayer::crosswalk, "crosswalk"},
    {MapLayer::carpark, "carpark"},
    {MapLayer::walkway, "walkway"},
    {MapLayer::generic_drivable, "generic_drivable"},
    {MapLayer::stop_zone, "stop_zone"},
    {MapLayer::speed_bump, "speed_bump"},
    {MapLayer::road_edge, "road_edge"},
    {MapLayer::road_line, "road_line"},
}};

}  // namespace

std::string_view to_string(MapLayer layer) { return kLayerNames[static_cast<std::size_t>(layer)].second; }

MapLayer map_layer_from_string(std::string_view name) {
  for (const auto& [l, n] : kLayerNames) {
    if (n == name) return l;
  }
  throw Error(ErrorCode::unknown_layer, std::string(name));
}

std::array<MapLayer, kNumMapLayers> all_map_layers() {
  std::array<MapLayer, kNumMapLayers> out{};
  for (std::size_t i = 0; i < kNumMapLayers; ++i) out[i] = kLayerNames[i].first;
  return out;
}

bool layer_is_polygon(MapLayer layer) { return layer != MapLayer::road_edge && layer != MapLayer::road_line; }

MapAttributes default_attributes(MapLayer layer) {
  switch (layer) {
    case MapLayer::lane: return LaneAttributes{};
    case MapLayer::lane_group: return LaneGroupAttributes{};
    case MapLayer::intersection: return IntersectionAttributes{};
    case MapLayer::road_line: return RoadLineAttributes{};
    case MapLayer::road_edge: return RoadEdgeAttributes{};
    default: return FreeformAttributes{};
  }
}

void MapObject::validate() const {
  if (id.empty()) throw Error(ErrorCode::invalid_argument, "map object with empty id");
  geometry.validate();
  const auto want = layer_is_polygon(layer) ? GeometryKind::polygon : GeometryKind::linestring;
  if (geometry.kind != want) {
    throw Error(ErrorCode::invalid_argument, id + ": geometry kind does not fit layer " + std::string(to_string(layer)));
  }
  if (attributes.index() != default_attributes(layer).index()) {
    throw Error(ErrorCode::invalid_argument, id + ": attribute record does not fit layer " + std::string(to_string(layer)));
  }
  if (const auto* lane = std::get_if<LaneAttributes>(&attributes)) {
    if (lane->centerline.kind != GeometryKind::linestring) {
      throw Error(ErrorCode::invalid_argument, id + ": lane centerline must be a linestring");
    }
    lane->centerline.validate();
    if (lane->speed_limit && !(*lane->speed_limit >= 0.0)) {
      throw Error(ErrorCode::invalid_argument, id + ": negative speed limit");
    }
  }
  if (mesh) {
    for (const auto& t : mesh->triangles) {
      for (const auto v : t) {
        if (v >= mesh->vertices.size()) throw Error(ErrorCode::invalid_argument, id + ": mesh index out of range");
      }
    }
  }
}

std::vector<std::pair<std::string, std::string>> MapObject::references() const {
  std::vector<std::pair<std::string, std::string>> out;
  if (const auto* lane = std::get_if<LaneAttributes>(&attributes)) {
    if (lane->left_boundary) out.emplace_back("left_boundary", *lane->left_boundary);
    if (lane->right_boundary) out.emplace_back("right_boundary", *lane->right_boundary);
    for (const auto& p : lane->predecessors) out.emplace_back("predecessors", p);
    for (const auto& s : lane->successors) out.emplace_back("successors", s);
    if (lane->left_neighbor) out.emplace_back("left_neighbor", *lane->left_neighbor);
    if (lane->right_neighbor) out.emplace_back("right_neighbor", *lane->right_neighbor);
  } else if (const auto* g = std::get_if<LaneGroupAttributes>(&attributes)) {
    for (const auto& l : g->lane_ids) out.emplace_back("lane_ids", l);
  } else if (const auto* x = std::get_if<IntersectionAttributes>(&attributes)) {
    for (const auto& l : x->lane_group_ids) out.emplace_back("lane_group_ids", l);
  }
  return out;
}

const LaneAttributes& MapObject::lane() const {
  const auto* lane = std::get_if<LaneAttributes>(&attributes);
  if (!lane) throw Error(ErrorCode::invalid_argument, id + " is not a lane");
  return *lane;
}

std::vector<std::uint8_t> encode_mesh(const TriangleMesh& mesh) {
  std::vector<std::uint8_t> out(8 + mesh.vertices.size() * 24 + mesh.triangles.size() * 12);
  const auto nv = static_cast<std::uint32_t>(mesh.vertices.size());
  const auto nt = static_cast<std::uint32_t>(mesh.triangles.size());
  std::memcpy(out.data(), &nv, 4);
  std::memcpy(out.data() + 4, &nt, 4);
  std::size_t at = 8;
  for (const auto& v : mesh.vertices) {
    std::memcpy(out.data() + at, v.data(), 24);
    at += 24;
  }
  for (const auto& t : mesh.triangles) {
    std::memcpy(out.data() + at, t.data(), 12);
    at += 12;
  }
  return out;
}

TriangleMesh decode_mesh(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8) throw Error(ErrorCode::corrupt_file, "mesh blob too short");
  std::uint32_t nv = 0, nt = 0;
  std::memcpy(&nv, bytes.data(), 4);
  std::memcpy(&nt, bytes.data() + 4, 4);
  if (bytes.size() != 8 + std::uint64_t{nv} * 24 + std::uint64_t{nt} * 12) {
    throw Error(ErrorCode::corrupt_file, "mesh blob length mismatch");
  }
  TriangleMesh m;
  m.vertices.resize(nv);
  m.triangles.resize(nt);
  std::size_t at = 8;
  for (auto& v : m.vertices) {
    std::memcpy(v.data(), bytes.data() + at, 24);
    at += 24;
  }
  for (auto& t : m.triangles) {
    std::memcpy(t.data(), bytes.data() + at, 12);
    at += 12;
    for (const auto i : t) {
      if (i >= nv) throw Error(ErrorCode::corrupt_file, "mesh index out of range");
    }
  }
  return m;
}

namespace {

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

bool in_triangle(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c) {
  return cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0;
}

}  // namespace

TriangleMesh triangulate_polygon(const Geometry& polygon) {
  if (polygon.kind != GeometryKind::polygon) throw Error(ErrorCode::invalid_argument, "can only triangulate polygons");
  const auto& ring = polygon.rings.front();
  TriangleMesh mesh;
  mesh.vertices.assign(ring.begin(), ring.end() - 1);
  const std::size_t n = mesh.vertices.size();
  if (n < 3) return mesh;
  double area2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = mesh.vertices[i];
    const auto& b = mesh.vertices[(i + 1) % n];
    area2 += a.x() * b.y() - b.x() * a.y();
  }
  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = static_cast<std::uint32_t>(area2 >= 0.0 ? i : n - 1 - i);
  auto pt = [&](std::uint32_t i) { return Vec2(mesh.vertices[i].head<2>()); };

  std::size_t guard = 0;
  while (idx.size() > 3 && guard < 2 * n * n) {
    bool clipped = false;
    const std::size_t m = idx.size();
    for (std::size_t k = 0; k < m; ++k) {
      const auto ia = idx[(k + m - 1) % m], ib = idx[k], ic = idx[(k + 1) % m];
      const Vec2 a = pt(ia), b = pt(ib), c = pt(ic);
      if (cross(a, b, c) <= 0.0) continue;  // reflex or degenerate
      bool blocked = false;
      for (const auto j : idx) {
        if (j == ia || j == ib || j == ic) continue;
        if (in_triangle(pt(j), a, b, c)) {
          blocked = true;
          break;
        }
      }
      if (blocked) continue;
      mesh.triangles.push_back({ia, ib, ic});
      idx.erase(idx.begin() + static_cast<long>(k));
      clipped = true;
      break;
    }
    ++guard;
    if (!clipped) {
      // Collinear or self-touching remainder: drop the flattest vertex.
      std::size_t flat = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double c = std::abs(cross(pt(idx[(k + idx.size() - 1) % idx.size()]), pt(idx[k]), pt(idx[(k + 1) % idx.size()])));
        if (c < best) {
          best = c;
          flat = k;
        }
      }
      idx.erase(idx.begin() + static_cast<long>(flat));
    }
  }
  if (idx.size() == 3 && cross(pt(idx[0]), pt(idx[1]), pt(idx[2])) != 0.0) {
    mesh.triangles.push_back({idx[0], idx[1], idx[2]});
  }
  return mesh;
}

}  // namespace d123
