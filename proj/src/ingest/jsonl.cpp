#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "d123/error.hpp"
#include "d123/ingest/source.hpp"
#include "d123/log/json_io.hpp"
#include "d123/map/map_store.hpp"

namespace d123 {

namespace fs = std::filesystem;
using json_io::json;

const EventStream* ParsedLog::stream(const ModalityKey& key) const {
  for (const auto& s : streams) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

// Error context for one source line.
struct Where {
  std::string file;
  std::size_t line = 0;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::schema_violation, file + ":" + std::to_string(line) + ": " + what);
  }
};

const json& field(const json& j, const char* name, const Where& w) {
  auto it = j.find(name);
  if (it == j.end()) w.fail(std::string("missing field '") + name + "'");
  return *it;
}

std::int64_t get_int(const json& j, const char* name, const Where& w) {
  const auto& v = field(j, name, w);
  if (!v.is_number_integer()) w.fail(std::string("field '") + name + "' must be an integer");
  return v.get<std::int64_t>();
}

double get_num(const json& v, const std::string& name, const Where& w) {
  if (!v.is_number()) w.fail("field '" + name + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) w.fail("field '" + name + "' must be finite");
  return d;
}

std::string get_str(const json& j, const char* name, const Where& w) {
  const auto& v = field(j, name, w);
  if (!v.is_string()) w.fail(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

template <std::size_t N>
std::array<double, N> get_arr(const json& v, const std::string& name, const Where& w) {
  if (!v.is_array() || v.size() != N) w.fail("field '" + name + "' must be an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = get_num(v[i], name, w);
  return out;
}

Vec3 get_vec3(const json& j, const char* name, const Where& w) {
  const auto a = get_arr<3>(field(j, name, w), name, w);
  return {a[0], a[1], a[2]};
}

Vec3 opt_vec3(const json& j, const char* name, const Where& w) {
  return j.contains(name) ? get_vec3(j, name, w) : Vec3::Zero();
}

SE3 get_pose(const json& j, const char* position, const char* orientation, const Where& w) {
  const Vec3 t = get_vec3(j, position, w);
  const auto q = get_arr<4>(field(j, orientation, w), orientation, w);
  try {
    return SE3::from_wxyz(t, q[0], q[1], q[2], q[3]);
  } catch (const Error& e) {
    w.fail(e.what());
  }
}

json arr(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }
json quat(const SE3& p) {
  const auto& q = p.rotation();
  return json::array({q.w(), q.x(), q.y(), q.z()});
}

// Reads non-empty lines as JSON objects.
template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path.string());
  std::string text;
  Where w{path.filename().string(), 0};
  while (std::getline(in, text)) {
    ++w.line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      w.fail(std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) w.fail("expected a JSON object");
    fn(j, w);
  }
}

void check_order(TimePoint prev, TimePoint t, bool strict, const Where& w) {
  if (t < prev || (strict && t == prev)) {
    throw Error(ErrorCode::non_monotonic_timestamps, w.file + ":" + std::to_string(w.line) + ": timestamp " +
                                                         std::to_string(to_micros(t)) + "us after " +
                                                         std::to_string(to_micros(prev)) + "us");
  }
}

PayloadRef parse_payload(const json& j, const Where& w) {
  const Codec codec(get_str(j, "codec", w));
  PayloadRef p;
  try {
    if (j.contains("data_base64")) {
      p = PayloadRef::inline_data(codec, base64_decode(get_str(j, "data_base64", w)));
    } else if (j.contains("path")) {
      p = PayloadRef::external_file(codec, get_str(j, "path", w));
    } else {
      w.fail("payload needs 'data_base64' or 'path'");
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::schema_violation) throw;
    w.fail(e.what());
  }
  if (j.contains("frame_index")) p.frame_index = get_int(j, "frame_index", w);
  return p;
}

json payload_json(const PayloadRef& p) {
  json j{{"codec", p.codec.name()}};
  if (p.location == PayloadLocation::inline_bytes) j["data_base64"] = base64_encode(p.bytes);
  else j["path"] = p.relative_path;
  if (p.frame_index) j["frame_index"] = *p.frame_index;
  return j;
}

// Frame of a box line as a transform into the global frame at time t.
SE3 frame_to_global(const std::string& tag, TimePoint t, const std::vector<EgoStateRecord>& ego,
                    const LogMetadata& meta, const Where& w) {
  if (tag == "global") return SE3();
  SE3 to_global;
  const bool body = tag == "body";
  const bool camera = tag.rfind("camera:", 0) == 0;
  if (!body && !camera) throw Error(ErrorCode::unknown_frame_tag, w.file + ":" + std::to_string(w.line) + ": frame '" + tag + "'");
  const auto pose = interpolate_ego_pose(ego, t);
  if (!pose) w.fail("no ego pose covers t=" + std::to_string(to_micros(t)) + "us for frame '" + tag + "'");
  if (body) return *pose;
  const std::string id = tag.substr(7);
  auto it = meta.cameras.find(id);
  if (it == meta.cameras.end()) throw Error(ErrorCode::unknown_frame_tag, w.file + ":" + std::to_string(w.line) + ": unknown camera '" + id + "'");
  return *pose * it->second.extrinsic;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  for (std::size_t i = 0; i < bytes.size(); i += 3) {
    const std::uint32_t n = (std::uint32_t(bytes[i]) << 16) | (i + 1 < bytes.size() ? std::uint32_t(bytes[i + 1]) << 8 : 0) |
                            (i + 2 < bytes.size() ? bytes[i + 2] : 0);
    out += kB64[(n >> 18) & 63];
    out += kB64[(n >> 12) & 63];
    out += i + 1 < bytes.size() ? kB64[(n >> 6) & 63] : '=';
    out += i + 2 < bytes.size() ? kB64[n & 63] : '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4) throw Error(ErrorCode::invalid_argument, "base64 length not a multiple of 4");
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const int pad = (text[i + 3] == '=') + (text[i + 2] == '=');
    if (pad && i + 4 != text.size()) throw Error(ErrorCode::invalid_argument, "base64 padding inside data");
    std::uint32_t n = 0;
    for (int k = 0; k < 4; ++k) {
      const int v = k >= 4 - pad ? 0 : val(text[i + k]);
      if (v < 0) throw Error(ErrorCode::invalid_argument, "invalid base64 character");
      n = (n << 6) | static_cast<std::uint32_t>(v);
    }
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(n));
  }
  return out;
}

std::optional<SE3> interpolate_ego_pose(const std::vector<EgoStateRecord>& ego, TimePoint t) {
  auto it = std::lower_bound(ego.begin(), ego.end(), t, [](const EgoStateRecord& r, TimePoint q) { return r.timestamp < q; });
  if (it == ego.end()) return std::nullopt;
  if (it->timestamp == t) return it->pose;
  if (it == ego.begin()) return std::nullopt;
  const auto& a = *(it - 1);
  const auto& b = *it;
  const double s = static_cast<double>((t - a.timestamp).count()) / static_cast<double>((b.timestamp - a.timestamp).count());
  const Vec3 p = (1.0 - s) * a.pose.translation() + s * b.pose.translation();
  return SE3(p, a.pose.rotation().slerp(s, b.pose.rotation()).normalized());
}

ParsedLog parse_jsonl_source(const fs::path& dir) {
  ParsedLog out;
  out.payload_base = dir;
  {
    const fs::path mp = dir / "metadata.json";
    std::ifstream in(mp);
    if (!in) throw Error(ErrorCode::io_failure, "missing " + mp.string());
    try {
      out.metadata = json_io::metadata_from_json(json::parse(in));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::schema_violation, "metadata.json: " + std::string(e.what()));
    } catch (const Error& e) {
      throw Error(ErrorCode::schema_violation, "metadata.json: " + std::string(e.what()));
    }
  }
  const auto& meta = out.metadata;

  std::vector<EgoStateRecord> ego;
  if (fs::exists(dir / "ego_state.jsonl")) {
    for_each_line(dir / "ego_state.jsonl", [&](const json& j, const Where& w) {
      EgoStateRecord r;
      r.timestamp = from_micros(get_int(j, "timestamp_us", w));
      const std::string tag = j.value("frame", std::string("global"));
      if (tag != "global") throw Error(ErrorCode::unknown_frame_tag, w.file + ":" + std::to_string(w.line) + ": ego frame '" + tag + "'");
      r.pose = get_pose(j, "position_m", "orientation_wxyz", w);
      r.velocity_body = opt_vec3(j, "velocity_body_mps", w);
      r.acceleration_body = opt_vec3(j, "acceleration_body_mps2", w);
      r.angular_velocity_z = j.contains("yaw_rate_radps") ? get_num(j["yaw_rate_radps"], "yaw_rate_radps", w) : 0.0;
      if (!ego.empty()) check_order(ego.back().timestamp, r.timestamp, true, w);
      ego.push_back(std::move(r));
    });
    out.streams.push_back({ModalityKey::ego_state(), ego});
  }

  if (fs::exists(dir / "boxes.jsonl")) {
    std::vector<BoxFrame> frames;
    for_each_line(dir / "boxes.jsonl", [&](const json& j, const Where& w) {
      const TimePoint t = from_micros(get_int(j, "timestamp_us", w));
      if (!frames.empty()) check_order(frames.back().timestamp, t, false, w);
      if (frames.empty() || frames.back().timestamp != t) frames.push_back({t, {}});
      if (j.value("empty_frame", false)) return;
      BoxRecord b;
      b.timestamp = t;
      b.track_id = get_str(j, "track_id", w);
      b.raw_label = get_str(j, "label", w);
      const SE3 local = get_pose(j, "center_m", "orientation_wxyz", w);
      b.extent = get_vec3(j, "size_m", w);
      if ((b.extent.array() <= 0.0).any()) w.fail("size_m must be positive");
      const SE3 to_global = frame_to_global(j.value("frame", std::string("global")), t, ego, meta, w);
      b.pose = to_global * local;
      if (j.contains("velocity_mps")) b.velocity = to_global.rotation() * get_vec3(j, "velocity_mps", w);
      frames.back().boxes.push_back(std::move(b));
    });
    out.streams.push_back({ModalityKey::boxes(), std::move(frames)});
  }

  if (fs::exists(dir / "traffic_lights.jsonl")) {
    std::vector<TrafficLightFrame> frames;
    for_each_line(dir / "traffic_lights.jsonl", [&](const json& j, const Where& w) {
      const TimePoint t = from_micros(get_int(j, "timestamp_us", w));
      if (!frames.empty()) check_order(frames.back().timestamp, t, false, w);
      if (frames.empty() || frames.back().timestamp != t) frames.push_back({t, {}});
      if (j.value("empty_frame", false)) return;
      TrafficLightRecord r;
      r.timestamp = t;
      r.lane_ref = get_str(j, "lane_id", w);
      try {
        r.state = traffic_light_state_from_string(get_str(j, "state", w));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::schema_violation) throw;
        w.fail(e.what());
      }
      frames.back().lights.push_back(std::move(r));
    });
    out.streams.push_back({ModalityKey::traffic_lights(), std::move(frames)});
  }

  std::vector<fs::path> sensor_files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (e.is_regular_file() && e.path().extension() == ".jsonl" &&
        (name.rfind("camera_", 0) == 0 || name.rfind("lidar_", 0) == 0)) {
      sensor_files.push_back(e.path());
    }
  }
  std::sort(sensor_files.begin(), sensor_files.end());
  for (const auto& path : sensor_files) {
    const auto key = ModalityKey::parse(path.stem().string());
    if (!key || !key->is_sensor()) throw Error(ErrorCode::schema_violation, path.filename().string() + ": unrecognized stream file");
    if (key->kind == ModalityKind::camera) {
      std::vector<CameraFrameRecord> rows;
      for_each_line(path, [&](const json& j, const Where& w) {
        CameraFrameRecord r;
        r.timestamp = from_micros(get_int(j, "timestamp_us", w));
        r.camera_id = key->sensor_id;
        r.payload = parse_payload(j, w);
        if (!rows.empty()) check_order(rows.back().timestamp, r.timestamp, true, w);
        rows.push_back(std::move(r));
      });
      out.streams.push_back({*key, std::move(rows)});
    } else {
      std::vector<LidarSweepRecord> rows;
      for_each_line(path, [&](const json& j, const Where& w) {
        LidarSweepRecord r;
        r.timestamp_start = from_micros(get_int(j, "timestamp_start_us", w));
        r.timestamp_end = from_micros(get_int(j, "timestamp_end_us", w));
        if (r.timestamp_end < r.timestamp_start) w.fail("sweep ends before it starts");
        r.lidar_id = key->sensor_id;
        r.payload = parse_payload(j, w);
        if (!rows.empty()) check_order(rows.back().timestamp_start, r.timestamp_start, true, w);
        rows.push_back(std::move(r));
      });
      out.streams.push_back({*key, std::move(rows)});
    }
  }
  std::sort(out.streams.begin(), out.streams.end(), [](const auto& a, const auto& b) { return a.key < b.key; });

  if (fs::is_directory(dir / "map")) out.map = import_geojson(dir / "map");
  else if (fs::exists(dir / "map.geojson")) out.map = import_geojson(dir / "map.geojson");
  return out;
}

void write_jsonl_source(const ParsedLog& log, const fs::path& dir, const JsonlWriteOptions& options) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "metadata.json");
    out << json_io::metadata_to_json(log.metadata).dump(1) << '\n';
  }
  const std::vector<EgoStateRecord>* ego = nullptr;
  if (const auto* s = log.stream(ModalityKey::ego_state())) ego = &std::get<std::vector<EgoStateRecord>>(s->rows);
  std::set<std::string> copied;
  auto copy_payload = [&](const PayloadRef& p) {
    if (p.location != PayloadLocation::external || !copied.insert(p.relative_path).second) return;
    const fs::path dst = dir / p.relative_path;
    fs::create_directories(dst.parent_path());
    const auto bytes = payload_bytes(p, log.payload_base);
    std::ofstream(dst, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  };

  for (const auto& stream : log.streams) {
    std::ofstream out(dir / (stream.key.name() + ".jsonl"));
    std::visit(
        [&](const auto& rows) {
          using T = typename std::decay_t<decltype(rows)>::value_type;
          for (const auto& r : rows) {
            if constexpr (std::is_same_v<T, EgoStateRecord>) {
              out << json{{"timestamp_us", to_micros(r.timestamp)}, {"frame", "global"}, {"position_m", arr(r.pose.translation())},
                          {"orientation_wxyz", quat(r.pose)}, {"velocity_body_mps", arr(r.velocity_body)},
                          {"acceleration_body_mps2", arr(r.acceleration_body)}, {"yaw_rate_radps", r.angular_velocity_z}}
                         .dump()
                  << '\n';
            } else if constexpr (std::is_same_v<T, BoxFrame>) {
              if (r.boxes.empty()) out << json{{"timestamp_us", to_micros(r.timestamp)}, {"empty_frame", true}}.dump() << '\n';
              for (const auto& b : r.boxes) {
                std::string tag = "global";
                SE3 to_local;
                if (options.box_frame != BoxFrameTag::global) {
                  const auto pose = ego ? interpolate_ego_pose(*ego, b.timestamp) : std::nullopt;
                  if (!pose) throw Error(ErrorCode::invalid_argument, "no ego pose for a body-frame box");
                  SE3 frame = *pose;
                  tag = "body";
                  if (options.box_frame == BoxFrameTag::camera) {
                    frame = frame * log.metadata.cameras.at(options.box_camera).extrinsic;
                    tag = "camera:" + options.box_camera;
                  }
                  to_local = frame.inverse();
                }
                const SE3 local = to_local * b.pose;
                json j{{"timestamp_us", to_micros(b.timestamp)}, {"frame", tag}, {"track_id", b.track_id}, {"label", b.raw_label},
                       {"center_m", arr(local.translation())}, {"orientation_wxyz", quat(local)}, {"size_m", arr(b.extent)}};
                if (b.velocity) j["velocity_mps"] = arr(to_local.rotation() * *b.velocity);
                out << j.dump() << '\n';
              }
            } else if constexpr (std::is_same_v<T, TrafficLightFrame>) {
              if (r.lights.empty()) out << json{{"timestamp_us", to_micros(r.timestamp)}, {"empty_frame", true}}.dump() << '\n';
              for (const auto& l : r.lights) {
                out << json{{"timestamp_us", to_micros(l.timestamp)}, {"lane_id", l.lane_ref}, {"state", std::string(to_string(l.state))}}.dump()
                    << '\n';
              }
            } else if constexpr (std::is_same_v<T, CameraFrameRecord>) {
              copy_payload(r.payload);
              json j = payload_json(r.payload);
              j["timestamp_us"] = to_micros(r.timestamp);
              out << j.dump() << '\n';
            } else {
              copy_payload(r.payload);
              json j = payload_json(r.payload);
              j["timestamp_start_us"] = to_micros(r.timestamp_start);
              j["timestamp_end_us"] = to_micros(r.timestamp_end);
              out << j.dump() << '\n';
            }
          }
        },
        stream.rows);
  }
  if (log.map) {
    const auto store = MapStore::from_objects(*log.map);
    export_geojson(*store, dir / "map");
  }
}

JsonlParser::JsonlParser(fs::path root) : root_(std::move(root)) {
  if (!fs::is_directory(root_)) throw Error(ErrorCode::io_failure, "source " + root_.string() + " is not a directory");
}

std::vector<std::string> JsonlParser::log_names() const {
  if (fs::exists(root_ / "metadata.json")) return {root_.filename().string()};
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(root_)) {
    if (e.is_directory() && fs::exists(e.path() / "metadata.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ParsedLog JsonlParser::parse(const std::string& log_name) const {
  if (fs::exists(root_ / "metadata.json")) {
    if (log_name != root_.filename().string()) throw Error(ErrorCode::invalid_argument, "unknown source log '" + log_name + "'");
    return parse_jsonl_source(root_);
  }
  return parse_jsonl_source(root_ / log_name);
}

}  // namespace d123
