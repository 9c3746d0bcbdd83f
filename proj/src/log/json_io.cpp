#include "d123/log/json_io.hpp"

#include "d123/error.hpp"

namespace d123::json_io {

namespace {

std::int64_t micros(TimePoint t) { return to_micros(t); }

template <class F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string(what) + ": " + e.what());
  }
}

}  // namespace

json vec3_to_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 vec3_from_json(const json& j) {
  return guarded("vector", [&] {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::invalid_argument, "expected a 3-vector");
    return Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
  });
}

json se3_to_json(const SE3& pose) {
  const auto& q = pose.rotation();
  return {{"t", vec3_to_json(pose.translation())}, {"q", json::array({q.w(), q.x(), q.y(), q.z()})}};
}

SE3 se3_from_json(const json& j) {
  return guarded("pose", [&] {
    const auto& q = j.at("q");
    if (!q.is_array() || q.size() != 4) throw Error(ErrorCode::invalid_argument, "pose quaternion needs 4 values");
    return SE3::from_wxyz(vec3_from_json(j.at("t")), q.at(0).get<double>(), q.at(1).get<double>(),
                          q.at(2).get<double>(), q.at(3).get<double>());
  });
}

json camera_to_json(const CameraModel& c) {
  return {{"model", std::string(to_string(c.model))},
          {"fx", c.fx},
          {"fy", c.fy},
          {"cx", c.cx},
          {"cy", c.cy},
          {"distortion", c.distortion},
          {"width", c.width},
          {"height", c.height},
          {"extrinsic", se3_to_json(c.extrinsic)}};
}

CameraModel camera_from_json(const json& j) {
  return guarded("camera", [&] {
    CameraModel c;
    c.model = camera_projection_from_string(j.at("model").get<std::string>());
    c.fx = j.at("fx").get<double>();
    c.fy = j.at("fy").get<double>();
    c.cx = j.at("cx").get<double>();
    c.cy = j.at("cy").get<double>();
    c.distortion = j.value("distortion", std::vector<double>{});
    c.width = j.at("width").get<std::int32_t>();
    c.height = j.at("height").get<std::int32_t>();
    c.extrinsic = se3_from_json(j.at("extrinsic"));
    c.validate();
    return c;
  });
}

json vehicle_to_json(const VehicleParameters& v) {
  json j = {{"length", v.length},
            {"width", v.width},
            {"height", v.height},
            {"wheelbase", v.wheelbase},
            {"infer_center_from_length", v.infer_center_from_length},
            {"pose_origin", std::string(to_string(v.pose_origin))}};
  if (v.rear_axle_to_center) j["rear_axle_to_center"] = *v.rear_axle_to_center;
  if (v.imu_to_rear_axle) j["imu_to_rear_axle"] = vec3_to_json(*v.imu_to_rear_axle);
  return j;
}

VehicleParameters vehicle_from_json(const json& j) {
  return guarded("vehicle", [&] {
    VehicleParameters v;
    v.length = j.at("length").get<double>();
    v.width = j.at("width").get<double>();
    v.height = j.at("height").get<double>();
    v.wheelbase = j.at("wheelbase").get<double>();
    v.infer_center_from_length = j.value("infer_center_from_length", false);
    v.pose_origin = pose_origin_from_string(j.value("pose_origin", std::string("rear_axle")));
    if (j.contains("rear_axle_to_center")) v.rear_axle_to_center = j.at("rear_axle_to_center").get<double>();
    if (j.contains("imu_to_rear_axle")) v.imu_to_rear_axle = vec3_from_json(j.at("imu_to_rear_axle"));
    v.validate();
    return v;
  });
}

json metadata_to_json(const LogMetadata& m) {
  json cams = json::object();
  for (const auto& [id, c] : m.cameras) cams[id] = camera_to_json(c);
  json lidars = json::object();
  for (const auto& [id, p] : m.lidars) lidars[id] = se3_to_json(p);
  json j = {{"log_id", m.log_id},   {"dataset", m.dataset},     {"vehicle", vehicle_to_json(m.vehicle)},
            {"cameras", cams},      {"lidars", lidars},         {"label_space", m.label_space}};
  if (m.map_ref) j["map_ref"] = *m.map_ref;
  return j;
}

LogMetadata metadata_from_json(const json& j) {
  return guarded("metadata", [&] {
    LogMetadata m;
    m.log_id = j.at("log_id").get<std::string>();
    m.dataset = j.value("dataset", std::string{});
    m.vehicle = vehicle_from_json(j.at("vehicle"));
    const json cams = j.value("cameras", json::object());
    for (const auto& [id, c] : cams.items()) m.cameras[id] = camera_from_json(c);
    const json lidars = j.value("lidars", json::object());
    for (const auto& [id, p] : lidars.items()) m.lidars[id] = se3_from_json(p);
    if (j.contains("map_ref") && !j.at("map_ref").is_null()) m.map_ref = j.at("map_ref").get<std::string>();
    m.label_space = j.value("label_space", std::string{});
    return m;
  });
}

json payload_to_json(const PayloadRef& p) {
  json j = {{"codec", p.codec.name()}};
  if (p.location == PayloadLocation::inline_bytes) {
    j["location"] = "inline";
    j["size"] = p.bytes.size();
  } else {
    j["location"] = "external";
    j["path"] = p.relative_path;
  }
  if (p.frame_index) j["frame_index"] = *p.frame_index;
  return j;
}

json record_to_json(const EgoStateRecord& r) {
  return {{"timestamp_us", micros(r.timestamp)},
          {"pose", se3_to_json(r.pose)},
          {"velocity_body", vec3_to_json(r.velocity_body)},
          {"acceleration_body", vec3_to_json(r.acceleration_body)},
          {"angular_velocity_z", r.angular_velocity_z}};
}

json record_to_json(const BoxRecord& r) {
  json j = {{"timestamp_us", micros(r.timestamp)},
            {"track_id", r.track_id},
            {"label", r.raw_label},
            {"pose", se3_to_json(r.pose)},
            {"extent", vec3_to_json(r.extent)}};
  if (r.velocity) j["velocity"] = vec3_to_json(*r.velocity);
  return j;
}

json record_to_json(const BoxFrame& r) {
  json boxes = json::array();
  for (const auto& b : r.boxes) boxes.push_back(record_to_json(b));
  return {{"timestamp_us", micros(r.timestamp)}, {"boxes", boxes}};
}

json record_to_json(const TrafficLightFrame& r) {
  json lights = json::array();
  for (const auto& l : r.lights) lights.push_back({{"lane_ref", l.lane_ref}, {"state", std::string(to_string(l.state))}});
  return {{"timestamp_us", micros(r.timestamp)}, {"lights", lights}};
}

json record_to_json(const CameraFrameRecord& r) {
  return {{"timestamp_us", micros(r.timestamp)}, {"camera_id", r.camera_id}, {"payload", payload_to_json(r.payload)}};
}

json record_to_json(const LidarSweepRecord& r) {
  return {{"timestamp_start_us", micros(r.timestamp_start)},
          {"timestamp_end_us", micros(r.timestamp_end)},
          {"lidar_id", r.lidar_id},
          {"payload", payload_to_json(r.payload)}};
}

}  // namespace d123::json_io

namespace d123 {

void LogMetadata::validate() const {
  if (log_id.empty()) throw Error(ErrorCode::invalid_argument, "log_id is empty");
  vehicle.validate();
  for (const auto& [id, c] : cameras) {
    if (id.empty()) throw Error(ErrorCode::invalid_argument, "empty camera id");
    c.validate();
  }
  for (const auto& [id, p] : lidars) {
    if (id.empty()) throw Error(ErrorCode::invalid_argument, "empty lidar id");
  }
}

std::string metadata_to_json(const LogMetadata& metadata) { return json_io::metadata_to_json(metadata).dump(); }

LogMetadata metadata_from_json(std::string_view text) {
  try {
    return json_io::metadata_from_json(json_io::json::parse(text));
  } catch (const json_io::json::exception& e) {
    throw Error(ErrorCode::corrupt_file, std::string("metadata is not valid JSON: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::corrupt_file, std::string("invalid metadata: ") + e.what());
  }
}

}  // namespace d123
