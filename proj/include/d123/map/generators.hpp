#pragma once

#include <cstdint>
#include <vector>

#include "d123/map/map_object.hpp"

namespace d123 {

/// n objects scattered over [0, extent]^2 across all layers, mixed 2D/3D.
/// References only point at objects that exist.
std::vector<MapObject> random_map_objects(std::size_t n, std::uint64_t seed, double extent = 1000.0);

struct RoadMapConfig {
  int lanes = 2;
  int segments = 3;
  double segment_length = 50.0;
  double lane_width = 3.5;
  Vec2 origin = Vec2::Zero();
};

/// Straight road along +x. Lane ids are lane_s<segment>_l<k>, k = 0 the
/// rightmost; lane k's left neighbor is k + 1. Segments chain by successor.
std::vector<MapObject> straight_road_map(const RoadMapConfig& config);

struct GridMapConfig {
  int blocks_x = 3;
  int blocks_y = 3;
  double block_size = 100.0;
  double lane_width = 3.5;
  bool with_z = false;
};

/// City grid: two-lane streets (one lane per direction) between
/// intersections, with crosswalks, road lines, road edges, lane groups and
/// walkways. Street ids are deterministic.
std::vector<MapObject> grid_map(const GridMapConfig& config);

}  // namespace d123
