#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "d123/geom/se3.hpp"
#include "d123/geom/time.hpp"
#include "d123/log/modality.hpp"
#include "d123/log/payload.hpp"

namespace d123 {

struct EgoStateRecord {
  TimePoint timestamp;
  SE3 pose;  // global frame, anchored at the vehicle's pose origin
  Vec3 velocity_body = Vec3::Zero();
  Vec3 acceleration_body = Vec3::Zero();
  double angular_velocity_z = 0.0;

  bool operator==(const EgoStateRecord&) const = default;
};

struct BoxRecord {
  TimePoint timestamp;
  std::string track_id;
  std::string raw_label;  // source taxonomy, verbatim
  SE3 pose;               // global frame, box center
  Vec3 extent = Vec3::Ones();  // length, width, height
  std::optional<Vec3> velocity;

  bool operator==(const BoxRecord&) const = default;
};

/// All boxes annotated at one instant; one row of the boxes stream.
struct BoxFrame {
  TimePoint timestamp;
  std::vector<BoxRecord> boxes;

  bool operator==(const BoxFrame&) const = default;
};

enum class TrafficLightState : std::uint8_t { red = 0, yellow = 1, green = 2, off = 3, unknown = 4 };

std::string_view to_string(TrafficLightState state);
TrafficLightState traffic_light_state_from_string(std::string_view name);

struct TrafficLightRecord {
  TimePoint timestamp;
  std::string lane_ref;  // map object id
  TrafficLightState state = TrafficLightState::unknown;

  bool operator==(const TrafficLightRecord&) const = default;
};

struct TrafficLightFrame {
  TimePoint timestamp;
  std::vector<TrafficLightRecord> lights;

  bool operator==(const TrafficLightFrame&) const = default;
};

struct CameraFrameRecord {
  TimePoint timestamp;
  std::string camera_id;
  PayloadRef payload;

  bool operator==(const CameraFrameRecord&) const = default;
};

struct LidarSweepRecord {
  TimePoint timestamp_start;
  TimePoint timestamp_end;
  std::string lidar_id;
  PayloadRef payload;

  bool operator==(const LidarSweepRecord&) const = default;
};

/// Event time used for ordering and matching; lidar sweeps use their start.
inline TimePoint event_time(const EgoStateRecord& r) { return r.timestamp; }
inline TimePoint event_time(const BoxFrame& r) { return r.timestamp; }
inline TimePoint event_time(const TrafficLightFrame& r) { return r.timestamp; }
inline TimePoint event_time(const CameraFrameRecord& r) { return r.timestamp; }
inline TimePoint event_time(const LidarSweepRecord& r) { return r.timestamp_start; }

using StreamRows = std::variant<std::vector<EgoStateRecord>, std::vector<BoxFrame>, std::vector<TrafficLightFrame>,
                                std::vector<CameraFrameRecord>, std::vector<LidarSweepRecord>>;

/// One modality's rows in memory; the unit handed to the log writer.
struct EventStream {
  ModalityKey key;
  StreamRows rows;

  std::size_t size() const;
  std::vector<TimePoint> timestamps() const;

  bool operator==(const EventStream&) const = default;
};

}  // namespace d123
