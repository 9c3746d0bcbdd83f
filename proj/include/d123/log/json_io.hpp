#pragma once

// nlohmann::json conversions shared by the serializers, ingest and the CLI.

#include <json.hpp>

#include "d123/geom/camera.hpp"
#include "d123/geom/vehicle.hpp"
#include "d123/log/metadata.hpp"
#include "d123/log/records.hpp"

namespace d123::json_io {

using nlohmann::json;

json vec3_to_json(const Vec3& v);
Vec3 vec3_from_json(const json& j);

// {"t": [x, y, z], "q": [w, x, y, z]}
json se3_to_json(const SE3& pose);
SE3 se3_from_json(const json& j);

json camera_to_json(const CameraModel& camera);
CameraModel camera_from_json(const json& j);

json vehicle_to_json(const VehicleParameters& vehicle);
VehicleParameters vehicle_from_json(const json& j);

json metadata_to_json(const LogMetadata& metadata);
LogMetadata metadata_from_json(const json& j);

json payload_to_json(const PayloadRef& payload);

json record_to_json(const EgoStateRecord& r);
json record_to_json(const BoxRecord& r);
json record_to_json(const BoxFrame& r);
json record_to_json(const TrafficLightFrame& r);
json record_to_json(const CameraFrameRecord& r);
json record_to_json(const LidarSweepRecord& r);

}  // namespace d123::json_io
