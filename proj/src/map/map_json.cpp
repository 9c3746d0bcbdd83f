#include <fstream>

#include <json.hpp>

#include "d123/error.hpp"
#include "d123/map/map_store.hpp"

namespace d123 {

using nlohmann::json;

namespace {

json coords_json(const std::vector<Vec3>& pts, bool z) {
  json arr = json::array();
  for (const auto& p : pts) arr.push_back(z ? json::array({p.x(), p.y(), p.z()}) : json::array({p.x(), p.y()}));
  return arr;
}

json geometry_json(const Geometry& g) {
  switch (g.kind) {
    case GeometryKind::point: {
      const auto& p = g.rings[0][0];
      return {{"type", "Point"},
              {"coordinates", g.has_z ? json::array({p.x(), p.y(), p.z()}) : json::array({p.x(), p.y()})}};
    }
    case GeometryKind::linestring:
      return {{"type", "LineString"}, {"coordinates", coords_json(g.rings[0], g.has_z)}};
    case GeometryKind::polygon: {
      json rings = json::array();
      for (const auto& r : g.rings) rings.push_back(coords_json(r, g.has_z));
      return {{"type", "Polygon"}, {"coordinates", rings}};
    }
  }
  return nullptr;
}

Vec3 position(const json& j, int& dims) {
  if (!j.is_array() || (j.size() != 2 && j.size() != 3)) throw Error(ErrorCode::invalid_argument, "bad GeoJSON position");
  const int d = static_cast<int>(j.size());
  if (dims == 0) dims = d;
  if (dims != d) throw Error(ErrorCode::invalid_argument, "GeoJSON geometry mixes 2D and 3D positions");
  return Vec3(j[0].get<double>(), j[1].get<double>(), d == 3 ? j[2].get<double>() : 0.0);
}

std::vector<Vec3> positions(const json& j, int& dims) {
  std::vector<Vec3> out;
  for (const auto& p : j) out.push_back(position(p, dims));
  return out;
}

Geometry geometry_from_json(const json& j) {
  const auto type = j.at("type").get<std::string>();
  const auto& c = j.at("coordinates");
  int dims = 0;
  Geometry g;
  if (type == "Point") {
    g.kind = GeometryKind::point;
    g.rings.push_back({position(c, dims)});
  } else if (type == "LineString") {
    g.kind = GeometryKind::linestring;
    g.rings.push_back(positions(c, dims));
  } else if (type == "Polygon") {
    g.kind = GeometryKind::polygon;
    for (const auto& r : c) g.rings.push_back(positions(r, dims));
  } else {
    throw Error(ErrorCode::invalid_argument, "unsupported GeoJSON geometry " + type);
  }
  g.has_z = dims == 3;
  g.validate();
  return g;
}

json opt(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<std::string>();
}

json attributes_json(const MapAttributes& a) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, LaneAttributes>) {
          json j = {{"centerline", geometry_json(v.centerline)},
                    {"left_boundary", opt(v.left_boundary)},
                    {"right_boundary", opt(v.right_boundary)},
                    {"predecessors", v.predecessors},
                    {"successors", v.successors},
                    {"left_neighbor", opt(v.left_neighbor)},
                    {"right_neighbor", opt(v.right_neighbor)}};
          j["speed_limit"] = v.speed_limit ? json(*v.speed_limit) : json(nullptr);
          return j;
        } else if constexpr (std::is_same_v<T, LaneGroupAttributes>) {
          return {{"lane_ids", v.lane_ids}};
        } else if constexpr (std::is_same_v<T, IntersectionAttributes>) {
          return {{"lane_group_ids", v.lane_group_ids}};
        } else if constexpr (std::is_same_v<T, RoadLineAttributes>) {
          return {{"marking_type", v.marking_type}};
        } else if constexpr (std::is_same_v<T, RoadEdgeAttributes>) {
          return {{"drivable", v.drivable}};
        } else {
          json j = json::object();
          for (const auto& [k, s] : v.values) j[k] = s;
          return j;
        }
      },
      a);
}

MapAttributes attributes_from(MapLayer layer, const json& j) {
  switch (layer) {
    case MapLayer::lane: {
      LaneAttributes a;
      a.centerline = geometry_from_json(j.at("centerline"));
      a.left_boundary = opt_string(j, "left_boundary");
      a.right_boundary = opt_string(j, "right_boundary");
      a.left_neighbor = opt_string(j, "left_neighbor");
      a.right_neighbor = opt_string(j, "right_neighbor");
      a.predecessors = j.value("predecessors", std::vector<std::string>{});
      a.successors = j.value("successors", std::vector<std::string>{});
      if (j.contains("speed_limit") && !j.at("speed_limit").is_null()) a.speed_limit = j.at("speed_limit").get<double>();
      return a;
    }
    case MapLayer::lane_group: return LaneGroupAttributes{j.value("lane_ids", std::vector<std::string>{})};
    case MapLayer::intersection: return IntersectionAttributes{j.value("lane_group_ids", std::vector<std::string>{})};
    case MapLayer::road_line: return RoadLineAttributes{j.value("marking_type", std::string{})};
    case MapLayer::road_edge: return RoadEdgeAttributes{j.value("drivable", false)};
    default: {
      FreeformAttributes a;
      for (const auto& [k, v] : j.items()) a.values[k] = v.is_string() ? v.get<std::string>() : v.dump();
      return a;
    }
  }
}

json mesh_json(const TriangleMesh& m) {
  json v = json::array(), t = json::array();
  for (const auto& p : m.vertices) v.push_back({p.x(), p.y(), p.z()});
  for (const auto& tri : m.triangles) t.push_back({tri[0], tri[1], tri[2]});
  return {{"vertices", v}, {"triangles", t}};
}

TriangleMesh mesh_from_json(const json& j) {
  TriangleMesh m;
  for (const auto& p : j.at("vertices")) m.vertices.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
  for (const auto& t : j.at("triangles")) {
    m.triangles.push_back({t.at(0).get<std::uint32_t>(), t.at(1).get<std::uint32_t>(), t.at(2).get<std::uint32_t>()});
  }
  return m;
}

void import_collection(const json& fc, const std::string& source, std::vector<MapObject>& out) {
  if (fc.value("type", std::string{}) != "FeatureCollection") {
    throw Error(ErrorCode::invalid_argument, source + ": not a FeatureCollection");
  }
  std::size_t n = 0;
  for (const auto& f : fc.at("features")) {
    try {
      const auto& props = f.at("properties");
      MapObject o;
      o.id = props.at("id").get<std::string>();
      o.layer = map_layer_from_string(props.at("layer").get<std::string>());
      o.geometry = geometry_from_json(f.at("geometry"));
      o.attributes = attributes_from(o.layer, props.value("attributes", json::object()));
      if (props.contains("mesh") && !props.at("mesh").is_null()) o.mesh = mesh_from_json(props.at("mesh"));
      o.validate();
      out.push_back(std::move(o));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::invalid_argument, source + " feature " + std::to_string(n) + ": " + e.what());
    }
    ++n;
  }
}

}  // namespace

std::string attributes_to_json(const MapAttributes& attributes) { return attributes_json(attributes).dump(); }

MapAttributes attributes_from_json(MapLayer layer, std::string_view text) {
  try {
    return attributes_from(layer, json::parse(text));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::corrupt_file, std::string("map attributes: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::corrupt_file, std::string("map attributes: ") + e.what());
  }
}

void export_geojson(const MapStore& store, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  for (const auto layer : all_map_layers()) {
    json features = json::array();
    for (std::size_t i = 0; i < store.size(); ++i) {
      if (store.layer_at(i) != layer) continue;
      const auto& o = store.object_at(i);
      json props = {{"id", o.id}, {"layer", std::string(to_string(o.layer))}, {"attributes", attributes_json(o.attributes)}};
      if (o.mesh) props["mesh"] = mesh_json(*o.mesh);
      features.push_back({{"type", "Feature"}, {"geometry", geometry_json(o.geometry)}, {"properties", props}});
    }
    if (features.empty()) continue;
    const json fc = {{"type", "FeatureCollection"}, {"features", features}};
    const auto path = directory / (std::string(to_string(layer)) + ".geojson");
    std::ofstream out(path);
    out << fc.dump() << '\n';
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
  }
}

std::vector<MapObject> import_geojson(const std::filesystem::path& path) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(path)) {
    for (const auto& e : std::filesystem::directory_iterator(path)) {
      if (e.path().extension() == ".geojson") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(path);
  }
  std::vector<MapObject> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw Error(ErrorCode::io_failure, "cannot read " + f.string());
    json fc;
    try {
      fc = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::invalid_argument, f.string() + ": " + e.what());
    }
    import_collection(fc, f.string(), out);
  }
  return out;
}

}  // namespace d123
