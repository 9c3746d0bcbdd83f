#include "stream_schema.hpp"

#include <algorithm>

#include "d123/error.hpp"

namespace d123::detail {

using ipc::DataType;
using ipc::Field;

namespace {

const Field kTimestamp{"timestamp_us", DataType::int64(), false};

void add_pose_fields(std::vector<Field>& out, bool as_list) {
  for (const char* name : kPoseColumns) {
    out.push_back({name, as_list ? DataType::list_of(DataType::float64()) : DataType::float64(), false});
  }
}

void add_payload_fields(std::vector<Field>& out) {
  out.push_back({"codec", DataType::utf8(), false});
  out.push_back({"location", DataType::uint8(), false});
  out.push_back({"data", DataType::binary(), true});
  out.push_back({"path", DataType::utf8(), true});
  out.push_back({"frame_index", DataType::int64(), true});
}

void append_pose(BatchColumns& c, const SE3& pose) {
  const auto& t = pose.translation();
  const auto& q = pose.rotation();
  const double v[7] = {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()};
  for (int i = 0; i < 7; ++i) c[kPoseColumns[i]].append_f64(v[i]);
}

void append_list_pose(BatchColumns& c, const SE3& pose) {
  const auto& t = pose.translation();
  const auto& q = pose.rotation();
  const double v[7] = {t.x(), t.y(), t.z(), q.w(), q.x(), q.y(), q.z()};
  for (int i = 0; i < 7; ++i) c[kPoseColumns[i]].child().append_f64(v[i]);
}

SE3 pose_from(const double v[7]) { return SE3::from_wxyz(Vec3(v[0], v[1], v[2]), v[3], v[4], v[5], v[6]); }

void append_payload(BatchColumns& c, const PayloadRef& p) {
  c["codec"].append_string(p.codec.name());
  c["location"].append_u8(static_cast<std::uint8_t>(p.location));
  if (p.location == PayloadLocation::inline_bytes) {
    c["data"].append_binary(p.bytes);
    c["path"].append_null();
  } else {
    c["data"].append_null();
    c["path"].append_string(p.relative_path);
  }
  if (p.frame_index) {
    c["frame_index"].append_i64(*p.frame_index);
  } else {
    c["frame_index"].append_null();
  }
}

PayloadRef read_payload(const ipc::IpcFileReader& f, std::size_t b, std::int64_t r) {
  PayloadRef p;
  p.codec = Codec(std::string(f.column(b, "codec").string(r)));
  const auto loc = f.column(b, "location").u8(r);
  if (loc > 1) throw Error(ErrorCode::corrupt_file, f.path().string() + ": bad payload location");
  p.location = static_cast<PayloadLocation>(loc);
  if (p.location == PayloadLocation::inline_bytes) {
    const auto data = f.column(b, "data");
    if (data.is_null(r)) throw Error(ErrorCode::corrupt_file, f.path().string() + ": inline payload is null");
    const auto bytes = data.binary(r);
    p.bytes.assign(bytes.begin(), bytes.end());
  } else {
    const auto path = f.column(b, "path");
    if (path.is_null(r)) throw Error(ErrorCode::corrupt_file, f.path().string() + ": external payload path is null");
    p.relative_path = std::string(path.string(r));
  }
  const auto fi = f.column(b, "frame_index");
  if (!fi.is_null(r)) p.frame_index = fi.i64(r);
  return p;
}

}  // namespace

std::vector<Field> stream_fields(ModalityKind kind) {
  std::vector<Field> out{kTimestamp};
  switch (kind) {
    case ModalityKind::ego_state:
      add_pose_fields(out, false);
      for (const char* n : {"vx", "vy", "vz", "ax", "ay", "az", "yaw_rate"}) out.push_back({n, DataType::float64(), false});
      break;
    case ModalityKind::boxes:
      out.push_back({"track_id", DataType::list_of(DataType::utf8()), false});
      out.push_back({"raw_label", DataType::list_of(DataType::utf8()), false});
      add_pose_fields(out, true);
      for (const char* n : {"length", "width", "height"}) out.push_back({n, DataType::list_of(DataType::float64()), false});
      for (const char* n : {"vx", "vy", "vz"}) out.push_back({n, DataType::list_of(DataType::float64(), true), false});
      break;
    case ModalityKind::traffic_lights:
      out.push_back({"lane_ref", DataType::list_of(DataType::utf8()), false});
      out.push_back({"state", DataType::list_of(DataType::uint8()), false});
      break;
    case ModalityKind::camera:
      add_payload_fields(out);
      break;
    case ModalityKind::lidar:
      out.push_back({"timestamp_end_us", DataType::int64(), false});
      add_payload_fields(out);
      break;
  }
  return out;
}

BatchColumns::BatchColumns(const std::vector<Field>& fields) {
  for (const auto& f : fields) {
    names_.push_back(f.name);
    cols_.emplace_back(f);
  }
}

ipc::ColumnBuilder& BatchColumns::operator[](std::string_view name) {
  const auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw Error(ErrorCode::invalid_argument, "no column " + std::string(name));
  return cols_[static_cast<std::size_t>(it - names_.begin())];
}

void append_row(BatchColumns& c, const EgoStateRecord& r) {
  c["timestamp_us"].append_i64(to_micros(r.timestamp));
  append_pose(c, r.pose);
  c["vx"].append_f64(r.velocity_body.x());
  c["vy"].append_f64(r.velocity_body.y());
  c["vz"].append_f64(r.velocity_body.z());
  c["ax"].append_f64(r.acceleration_body.x());
  c["ay"].append_f64(r.acceleration_body.y());
  c["az"].append_f64(r.acceleration_body.z());
  c["yaw_rate"].append_f64(r.angular_velocity_z);
}

void append_row(BatchColumns& c, const BoxFrame& r) {
  c["timestamp_us"].append_i64(to_micros(r.timestamp));
  for (const auto& b : r.boxes) {
    c["track_id"].child().append_string(b.track_id);
    c["raw_label"].child().append_string(b.raw_label);
    append_list_pose(c, b.pose);
    c["length"].child().append_f64(b.extent.x());
    c["width"].child().append_f64(b.extent.y());
    c["height"].child().append_f64(b.extent.z());
    for (int i = 0; i < 3; ++i) {
      auto& col = c[i == 0 ? "vx" : i == 1 ? "vy" : "vz"].child();
      if (b.velocity) {
        col.append_f64((*b.velocity)[i]);
      } else {
        col.append_null();
      }
    }
  }
  for (const char* n : {"track_id", "raw_label", "tx", "ty", "tz", "qw", "qx", "qy", "qz", "length", "width", "height",
                        "vx", "vy", "vz"}) {
    c[n].finish_list_entry();
  }
}

void append_row(BatchColumns& c, const TrafficLightFrame& r) {
  c["timestamp_us"].append_i64(to_micros(r.timestamp));
  for (const auto& l : r.lights) {
    c["lane_ref"].child().append_string(l.lane_ref);
    c["state"].child().append_u8(static_cast<std::uint8_t>(l.state));
  }
  c["lane_ref"].finish_list_entry();
  c["state"].finish_list_entry();
}

void append_row(BatchColumns& c, const CameraFrameRecord& r) {
  c["timestamp_us"].append_i64(to_micros(r.timestamp));
  append_payload(c, r.payload);
}

void append_row(BatchColumns& c, const LidarSweepRecord& r) {
  c["timestamp_us"].append_i64(to_micros(r.timestamp_start));
  c["timestamp_end_us"].append_i64(to_micros(r.timestamp_end));
  append_payload(c, r.payload);
}

EgoStateRecord read_ego(const ipc::IpcFileReader& f, std::size_t b, std::int64_t r) {
  EgoStateRecord e;
  e.timestamp = from_micros(f.column(b, "timestamp_us").i64(r));
  double v[7];
  for (int i = 0; i < 7; ++i) v[i] = f.column(b, kPoseColumns[i]).f64(r);
  e.pose = pose_from(v);
  e.velocity_body = Vec3(f.column(b, "vx").f64(r), f.column(b, "vy").f64(r), f.column(b, "vz").f64(r));
  e.acceleration_body = Vec3(f.column(b, "ax").f64(r), f.column(b, "ay").f64(r), f.column(b, "az").f64(r));
  e.angular_velocity_z = f.column(b, "yaw_rate").f64(r);
  return e;
}

BoxFrame read_boxes(const ipc::IpcFileReader& f, std::size_t b, std::int64_t r) {
  BoxFrame out;
  out.timestamp = from_micros(f.column(b, "timestamp_us").i64(r));
  const auto ids = f.column(b, "track_id");
  const auto [begin, end] = ids.list_range(r);
  const auto labels = f.column(b, "raw_label");
  std::vector<ipc::ArrayView> pose;
  for (const char* n : kPoseColumns) pose.push_back(f.column(b, n));
  std::vector<ipc::ArrayView> rest;
  for (const char* n : {"raw_label", "length", "width", "height", "vx", "vy", "vz"}) rest.push_back(f.column(b, n));
  for (const auto& col : pose) {
    if (col.list_range(r) != std::make_pair(begin, end)) {
      throw Error(ErrorCode::corrupt_file, f.path().string() + ": box list columns disagree in length");
    }
  }
  for (const auto& col : rest) {
    if (col.list_range(r) != std::make_pair(begin, end)) {
      throw Error(ErrorCode::corrupt_file, f.path().string() + ": box list columns disagree in length");
    }
  }
  for (std::int64_t i = begin; i < end; ++i) {
    BoxRecord box;
    box.timestamp = out.timestamp;
    box.track_id = std::string(ids.child().string(i));
    box.raw_label = std::string(labels.child().string(i));
    double v[7];
    for (int k = 0; k < 7; ++k) v[k] = pose[static_cast<std::size_t>(k)].child().f64(i);
    box.pose = pose_from(v);
    box.extent = Vec3(rest[1].child().f64(i), rest[2].child().f64(i), rest[3].child().f64(i));
    if (!rest[4].child().is_null(i)) {
      box.velocity = Vec3(rest[4].child().f64(i), rest[5].child().f64(i), rest[6].child().f64(i));
    }
    out.boxes.push_back(std::move(box));
  }
  return out;
}

TrafficLightFrame read_traffic_lights(const ipc::IpcFileReader& f, std::size_t b, std::int64_t r) {
  TrafficLightFrame out;
  out.timestamp = from_micros(f.column(b, "timestamp_us").i64(r));
  const auto lanes = f.column(b, "lane_ref");
  const auto states = f.column(b, "state");
  const auto range = lanes.list_range(r);
  if (states.list_range(r) != range) {
    throw Error(ErrorCode::corrupt_file, f.path().string() + ": traffic light columns disagree in length");
  }
  for (std::int64_t i = range.first; i < range.second; ++i) {
    const auto s = states.child().u8(i);
    if (s > static_cast<std::uint8_t>(TrafficLightState::unknown)) {
      throw Error(ErrorCode::corrupt_file, f.path().string() + ": bad traffic light state");
    }
    out.lights.push_back({out.timestamp, std::string(lanes.child().string(i)), static_cast<TrafficLightState>(s)});
  }
  return out;
}

CameraFrameRecord read_camera(const ipc::IpcFileReader& f, std::size_t b, std::int64_t r, const std::string& id) {
  return {from_micros(f.column(b, "timestamp_us").i64(r)), id, read_payload(f, b, r)};
}

LidarSweepRecord read_lidar(const ipc::IpcFileReader& f, std::size_t b, std::int64_t r, const std::string& id) {
  return {from_micros(f.column(b, "timestamp_us").i64(r)), from_micros(f.column(b, "timestamp_end_us").i64(r)), id,
          read_payload(f, b, r)};
}

}  // namespace d123::detail
