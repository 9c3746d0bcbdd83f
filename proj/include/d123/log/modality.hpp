#pragma once

#include <compare>
#include <optional>
#include <string>
#include <string_view>

namespace d123 {

enum class ModalityKind { ego_state, boxes, traffic_lights, camera, lidar };

std::string_view to_string(ModalityKind kind);

/// Identifies one event stream in a log. Sensor modalities carry the sensor
/// id, e.g. {camera, "pcam_f0"} named "camera_pcam_f0".
struct ModalityKey {
  ModalityKind kind = ModalityKind::ego_state;
  std::string sensor_id;

  static ModalityKey ego_state() { return {ModalityKind::ego_state, {}}; }
  static ModalityKey boxes() { return {ModalityKind::boxes, {}}; }
  static ModalityKey traffic_lights() { return {ModalityKind::traffic_lights, {}}; }
  static ModalityKey camera(std::string id) { return {ModalityKind::camera, std::move(id)}; }
  static ModalityKey lidar(std::string id) { return {ModalityKind::lidar, std::move(id)}; }

  /// Parses a stream name such as "lidar_top"; nullopt when unrecognized.
  static std::optional<ModalityKey> parse(std::string_view name);

  std::string name() const;
  std::string file_name() const { return name() + ".arrow"; }
  bool is_sensor() const { return kind == ModalityKind::camera || kind == ModalityKind::lidar; }

  auto operator<=>(const ModalityKey&) const = default;
};

}  // namespace d123
