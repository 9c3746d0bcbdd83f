#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "d123/geom/camera.hpp"
#include "d123/geom/vehicle.hpp"

namespace d123 {

/// Static per-log description embedded in every modality file.
struct LogMetadata {
  std::string log_id;
  std::string dataset;
  VehicleParameters vehicle;
  std::map<std::string, CameraModel> cameras;
  std::map<std::string, SE3> lidars;  // lidar-in-body extrinsics
  std::optional<std::string> map_ref;  // relative to the log directory
  std::string label_space;

  void validate() const;
  bool operator==(const LogMetadata&) const = default;
};

/// Canonical JSON text (sorted keys, shortest round-trip doubles).
std::string metadata_to_json(const LogMetadata& metadata);
/// Throws CorruptFile when the text is not a valid metadata document.
LogMetadata metadata_from_json(std::string_view text);

}  // namespace d123
