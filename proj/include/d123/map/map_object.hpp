#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "d123/map/geometry.hpp"

namespace d123 {

enum class MapLayer {
  lane,
  lane_group,
  intersection,
  crosswalk,
  carpark,
  walkway,
  generic_drivable,
  stop_zone,
  speed_bump,
  road_edge,
  road_line,
};

inline constexpr std::size_t kNumMapLayers = 11;

std::string_view to_string(MapLayer layer);
/// Throws UnknownLayer.
MapLayer map_layer_from_string(std::string_view name);
std::array<MapLayer, kNumMapLayers> all_map_layers();
/// Polygon layers are all but road_edge and road_line, which are polylines.
bool layer_is_polygon(MapLayer layer);

struct LaneAttributes {
  Geometry centerline;  // linestring
  std::optional<std::string> left_boundary;
  std::optional<std::string> right_boundary;
  std::optional<double> speed_limit;  // m/s
  std::vector<std::string> predecessors;
  std::vector<std::string> successors;
  std::optional<std::string> left_neighbor;
  std::optional<std::string> right_neighbor;

  bool operator==(const LaneAttributes&) const = default;
};

struct LaneGroupAttributes {
  std::vector<std::string> lane_ids;  // ordered, co-directional
  bool operator==(const LaneGroupAttributes&) const = default;
};

struct IntersectionAttributes {
  std::vector<std::string> lane_group_ids;
  bool operator==(const IntersectionAttributes&) const = default;
};

struct RoadLineAttributes {
  std::string marking_type;  // e.g. solid_white, dashed_yellow
  bool operator==(const RoadLineAttributes&) const = default;
};

struct RoadEdgeAttributes {
  bool drivable = false;
  bool operator==(const RoadEdgeAttributes&) const = default;
};

/// Layers without a defined attribute set keep free-form string values.
struct FreeformAttributes {
  std::map<std::string, std::string> values;
  bool operator==(const FreeformAttributes&) const = default;
};

using MapAttributes = std::variant<LaneAttributes, LaneGroupAttributes, IntersectionAttributes, RoadLineAttributes,
                                   RoadEdgeAttributes, FreeformAttributes>;

/// Indexed triangles, stored opaquely alongside polygon objects.
struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;

  bool operator==(const TriangleMesh&) const = default;
};

std::vector<std::uint8_t> encode_mesh(const TriangleMesh& mesh);
/// Throws CorruptFile on malformed blobs.
TriangleMesh decode_mesh(std::span<const std::uint8_t> bytes);

/// Ear-clipping of the outer ring in the xy-plane; z is carried through.
TriangleMesh triangulate_polygon(const Geometry& polygon);

struct MapObject {
  std::string id;
  MapLayer layer = MapLayer::lane;
  Geometry geometry;
  MapAttributes attributes = FreeformAttributes{};
  std::optional<TriangleMesh> mesh;

  /// Layer/geometry/attribute consistency. Throws InvalidArgument.
  void validate() const;
  /// Ids this object refers to, tagged with the referring field.
  std::vector<std::pair<std::string, std::string>> references() const;

  const LaneAttributes& lane() const;

  bool operator==(const MapObject&) const = default;
};

/// Attribute record default for a layer.
MapAttributes default_attributes(MapLayer layer);

}  // namespace d123
