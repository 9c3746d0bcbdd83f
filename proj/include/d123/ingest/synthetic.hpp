#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "d123/ingest/source.hpp"

namespace d123 {

/// Sensor counts and rates (Hz) of one rig, 0 for absent modalities.
struct RigPreset {
  std::string name;
  int cameras = 0;
  double camera_hz = 0.0;
  int lidars = 0;
  double lidar_hz = 0.0;
  double box_hz = 0.0;
  double traffic_light_hz = 0.0;
  bool has_map = false;
};

/// The nine rigs: nuScenes, WOD-Perception, AV2, PandaSet, KITTI-360,
/// WOD-Motion, nuPlan, PAI-AV, CARLA.
const std::vector<RigPreset>& rig_presets();
/// Throws InvalidArgument for unknown names.
const RigPreset& rig_preset(const std::string& name);

enum class EgoPath { line, circle };
enum class MapTemplate { none, straight_road, grid };

struct SyntheticScenarioConfig {
  std::uint64_t seed = 0;
  double duration_s = 10.0;
  RigPreset rig = rig_preset("nuPlan");
  double ego_hz = 20.0;
  EgoPath ego_path = EgoPath::line;
  double ego_speed = 10.0;    // m/s
  double ego_radius = 20.0;   // circle path, m
  int agents = 8;
  double box_position_noise = 0.0;  // sigma, m, added per box sample
  double keyframe_jitter_s = 0.02;  // box keyframes wobble around lidar sweeps
  MapTemplate map = MapTemplate::straight_road;  // ignored when the rig has no map
  std::string log_id;                            // default derived from rig and seed
  std::int64_t start_us = 1'600'000'000'000'000;
  int lidar_points = 256;
  int camera_payload_bytes = 64;

  void validate() const;
};

/// Closed-form world the generator samples from.
struct SyntheticWorld {
  SyntheticScenarioConfig config;

  struct Agent {
    std::string track_id;
    std::string label;
    bool circular = false;
    Vec2 origin = Vec2::Zero();  // line: position at t=0; circle: center
    double heading = 0.0;        // line: direction; circle: phase at t=0
    double speed = 0.0;          // m/s
    double radius = 0.0;
    Vec3 extent = Vec3::Ones();
  };
  std::vector<Agent> agents;

  /// Pose of the ego rear axle at `t` seconds after start.
  SE3 ego_pose(double t) const;
  Vec3 ego_velocity_body() const;
  Vec3 ego_acceleration_body() const;
  double ego_yaw_rate() const;
  SE3 agent_pose(std::size_t i, double t) const;
  Vec3 agent_velocity(std::size_t i, double t) const;
};

SyntheticWorld make_synthetic_world(const SyntheticScenarioConfig& config);

/// Samples the world into canonical streams, metadata and map.
ParsedLog generate_synthetic_log(const SyntheticScenarioConfig& config);

/// Writes the JSON-lines source for `config` into `directory` (plus
/// ground_truth.json describing the closed-form world).
SyntheticWorld generate_synthetic(const SyntheticScenarioConfig& config, const std::filesystem::path& directory);

/// Timestamps t0 + round(k * 1e6 / hz) for k with offset + k / hz < duration.
std::vector<std::int64_t> sample_times(std::int64_t t0, double hz, double duration_s, double offset_s = 0.0);

}  // namespace d123
