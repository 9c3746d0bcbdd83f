#include "d123/ingest/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "d123/error.hpp"
#include "d123/log/json_io.hpp"
#include "d123/map/generators.hpp"

namespace d123 {

namespace fs = std::filesystem;

const std::vector<RigPreset>& rig_presets() {
  static const std::vector<RigPreset> presets{
      {"nuScenes", 6, 12.0, 1, 20.0, 2.0, 0.0, true},
      {"WOD-Perception", 5, 10.0, 5, 10.0, 10.0, 0.0, true},
      {"AV2", 9, 20.0, 2, 10.0, 10.0, 0.0, true},
      {"PandaSet", 6, 10.0, 2, 10.0, 10.0, 0.0, false},
      {"KITTI-360", 4, 10.0, 1, 10.0, 10.0, 0.0, true},
      {"WOD-Motion", 0, 0.0, 0, 0.0, 10.0, 10.0, true},
      {"nuPlan", 8, 10.0, 5, 20.0, 20.0, 20.0, true},
      {"PAI-AV", 7, 30.0, 1, 10.0, 10.0, 0.0, false},
      {"CARLA", 6, 10.0, 2, 10.0, 10.0, 10.0, true},
  };
  return presets;
}

const RigPreset& rig_preset(const std::string& name) {
  std::string want = name;
  std::transform(want.begin(), want.end(), want.begin(), [](unsigned char c) { return std::tolower(c); });
  for (const auto& p : rig_presets()) {
    std::string have = p.name;
    std::transform(have.begin(), have.end(), have.begin(), [](unsigned char c) { return std::tolower(c); });
    if (have == want) return p;
  }
  throw Error(ErrorCode::invalid_argument, "unknown rig preset '" + name + "'");
}

void SyntheticScenarioConfig::validate() const {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::invalid_argument, m); };
  if (!(duration_s > 0)) bad("duration must be positive");
  if (!(ego_hz > 0)) bad("ego rate must be positive");
  if (rig.cameras < 0 || rig.lidars < 0) bad("sensor counts must be non-negative");
  if (rig.cameras > 0 && !(rig.camera_hz > 0)) bad("camera rate must be positive");
  if (rig.lidars > 0 && !(rig.lidar_hz > 0)) bad("lidar rate must be positive");
  if (rig.box_hz < 0 || rig.traffic_light_hz < 0) bad("rates must be non-negative");
  if (ego_path == EgoPath::circle && !(ego_radius > 0)) bad("circle radius must be positive");
  if (ego_speed < 0 || agents < 0 || box_position_noise < 0 || keyframe_jitter_s < 0) bad("negative scenario parameter");
}

std::vector<std::int64_t> sample_times(std::int64_t t0, double hz, double duration_s, double offset_s) {
  std::vector<std::int64_t> out;
  if (!(hz > 0)) return out;
  for (std::int64_t k = 0;; ++k) {
    const double s = offset_s + static_cast<double>(k) / hz;
    if (s >= duration_s - 1e-9) break;
    out.push_back(t0 + std::llround(s * 1e6));
  }
  return out;
}

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kGridBlock = 100.0;

Vec2 ego_anchor(const SyntheticScenarioConfig& c) {
  if (c.map == MapTemplate::grid) {
    return c.ego_path == EgoPath::circle ? Vec2(kGridBlock, kGridBlock - c.ego_radius)
                                         : Vec2(kLaneWidth + 1.0, kGridBlock - kLaneWidth / 2);
  }
  return {0.0, kLaneWidth / 2};
}

std::string default_log_id(const SyntheticScenarioConfig& c) {
  std::string rig;
  for (char ch : c.rig.name) {
    if (std::isalnum(static_cast<unsigned char>(ch))) rig += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-%06llu", static_cast<unsigned long long>(c.seed));
  return rig + buf;
}

std::vector<std::string> label_vocabulary(const RigPreset& rig) {
  if (rig.name == "nuScenes") {
    return {"vehicle.car", "vehicle.truck", "vehicle.bus.rigid", "human.pedestrian.adult", "vehicle.bicycle",
            "vehicle.motorcycle", "movable_object.trafficcone", "movable_object.barrier"};
  }
  return {"car", "truck", "bus", "pedestrian", "bicycle", "motorcycle", "traffic_cone", "barrier"};
}

Vec3 label_extent(std::size_t k) {
  static const Vec3 e[] = {{4.5, 1.9, 1.6}, {8.0, 2.5, 3.2}, {11.0, 2.6, 3.3}, {0.6, 0.6, 1.7},
                           {1.8, 0.6, 1.3}, {2.1, 0.8, 1.4}, {0.4, 0.4, 0.8}, {2.0, 0.4, 1.0}};
  return e[k % 8];
}

}  // namespace

SE3 SyntheticWorld::ego_pose(double t) const {
  const auto& c = config;
  const Vec2 a = ego_anchor(c);
  if (c.ego_path == EgoPath::line) return SE3::from_yaw(0.0, Vec3(a.x() + c.ego_speed * t, a.y(), 0.0));
  const Vec2 center = a + Vec2(0.0, c.ego_radius);
  const double phi = -M_PI / 2 + c.ego_speed / c.ego_radius * t;
  return SE3::from_yaw(phi + M_PI / 2, Vec3(center.x() + c.ego_radius * std::cos(phi), center.y() + c.ego_radius * std::sin(phi), 0.0));
}

Vec3 SyntheticWorld::ego_velocity_body() const { return {config.ego_speed, 0.0, 0.0}; }

Vec3 SyntheticWorld::ego_acceleration_body() const {
  if (config.ego_path == EgoPath::line) return Vec3::Zero();
  return {0.0, config.ego_speed * config.ego_speed / config.ego_radius, 0.0};
}

double SyntheticWorld::ego_yaw_rate() const {
  return config.ego_path == EgoPath::line ? 0.0 : config.ego_speed / config.ego_radius;
}

SE3 SyntheticWorld::agent_pose(std::size_t i, double t) const {
  const auto& a = agents.at(i);
  if (!a.circular) {
    const Vec2 p = a.origin + a.speed * t * Vec2(std::cos(a.heading), std::sin(a.heading));
    return SE3::from_yaw(a.heading, Vec3(p.x(), p.y(), a.extent.z() / 2));
  }
  const double phi = a.heading + a.speed / a.radius * t;
  return SE3::from_yaw(phi + M_PI / 2,
                       Vec3(a.origin.x() + a.radius * std::cos(phi), a.origin.y() + a.radius * std::sin(phi), a.extent.z() / 2));
}

Vec3 SyntheticWorld::agent_velocity(std::size_t i, double t) const {
  const auto& a = agents.at(i);
  const double yaw = agent_pose(i, t).yaw();
  return {a.speed * std::cos(yaw), a.speed * std::sin(yaw), 0.0};
}

SyntheticWorld make_synthetic_world(const SyntheticScenarioConfig& config) {
  config.validate();
  SyntheticWorld w;
  w.config = config;
  if (!w.config.rig.has_map) w.config.map = MapTemplate::none;
  if (w.config.log_id.empty()) w.config.log_id = default_log_id(w.config);
  std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ull + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto labels = label_vocabulary(config.rig);
  const Vec2 a = ego_anchor(w.config);
  for (int i = 0; i < config.agents; ++i) {
    SyntheticWorld::Agent ag;
    char id[32];
    std::snprintf(id, sizeof(id), "track_%04d", i);
    ag.track_id = id;
    const std::size_t k = static_cast<std::size_t>(rng() % labels.size());
    ag.label = labels[k];
    ag.extent = label_extent(k);
    ag.circular = u(rng) < 0.3;
    if (ag.circular) {
      ag.radius = 8.0 + 22.0 * u(rng);
      ag.origin = a + Vec2(-40.0 + 80.0 * u(rng), -40.0 + 80.0 * u(rng));
      ag.heading = 2 * M_PI * u(rng);
      ag.speed = 2.0 + 10.0 * u(rng);
    } else {
      ag.origin = a + Vec2(-40.0 + 80.0 * u(rng), -40.0 + 80.0 * u(rng));
      ag.heading = 2 * M_PI * u(rng) - M_PI;
      ag.speed = u(rng) < 0.2 ? 0.0 : 15.0 * u(rng);
    }
    w.agents.push_back(ag);
  }
  return w;
}

ParsedLog generate_synthetic_log(const SyntheticScenarioConfig& input) {
  const SyntheticWorld world = make_synthetic_world(input);
  const auto& c = world.config;
  const auto& rig = c.rig;
  std::mt19937_64 rng(c.seed ^ 0xD1B54A32D192ED03ull);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto rel = [&](std::int64_t t) { return static_cast<double>(t - c.start_us) * 1e-6; };

  ParsedLog log;
  auto& m = log.metadata;
  m.log_id = c.log_id;
  m.dataset = rig.name;
  m.label_space = rig.name + "-labels";
  m.vehicle.length = 4.9;
  m.vehicle.width = 1.95;
  m.vehicle.height = 1.7;
  m.vehicle.wheelbase = 2.9;
  m.vehicle.rear_axle_to_center = 1.39;
  m.vehicle.pose_origin = PoseOrigin::rear_axle;
  std::vector<std::string> camera_ids, lidar_ids;
  for (int k = 0; k < rig.cameras; ++k) {
    const std::string id = k == 0 ? "pcam_f0" : "pcam_" + std::to_string(k);
    CameraModel cam;
    cam.model = CameraProjection::pinhole;
    cam.fx = cam.fy = 800.0;
    cam.cx = 640.0;
    cam.cy = 360.0;
    cam.width = 1280;
    cam.height = 720;
    cam.extrinsic = camera_extrinsic_looking(Vec3(1.6, 0.0, 1.5), 2 * M_PI * k / rig.cameras);
    m.cameras[id] = cam;
    camera_ids.push_back(id);
  }
  for (int k = 0; k < rig.lidars; ++k) {
    const std::string id = k == 0 ? "lidar_top" : "lidar_" + std::to_string(k);
    m.lidars[id] = k == 0 ? SE3::from_translation(1.0, 0.0, 1.9) : SE3::from_yaw(2 * M_PI * k / rig.lidars, Vec3(1.5, 0.0, 0.6));
    lidar_ids.push_back(id);
  }
  if (c.map != MapTemplate::none) m.map_ref = "map.arrow";

  std::vector<EgoStateRecord> ego;
  for (auto t : sample_times(c.start_us, c.ego_hz, c.duration_s)) {
    EgoStateRecord r;
    r.timestamp = from_micros(t);
    r.pose = world.ego_pose(rel(t));
    r.velocity_body = world.ego_velocity_body();
    r.acceleration_body = world.ego_acceleration_body();
    r.angular_velocity_z = world.ego_yaw_rate();
    ego.push_back(r);
  }
  log.streams.push_back({ModalityKey::ego_state(), ego});
  const std::int64_t last_ego = ego.empty() ? c.start_us : to_micros(ego.back().timestamp);

  std::vector<std::int64_t> lidar_top_times;
  for (std::size_t k = 0; k < lidar_ids.size(); ++k) {
    const double offset = k == 0 ? 0.0 : u(rng) / rig.lidar_hz;
    const auto times = sample_times(c.start_us, rig.lidar_hz, c.duration_s, offset);
    if (k == 0) lidar_top_times = times;
    const std::int64_t sweep = std::llround(1e6 / rig.lidar_hz);
    const Codec codec(k == 0 ? CodecKind::raw_f32le : CodecKind::raw_deflate);
    std::vector<LidarSweepRecord> rows;
    for (std::size_t r = 0; r < times.size(); ++r) {
      std::mt19937_64 prng(c.seed * 1000003ull + k * 7919ull + r);
      std::uniform_real_distribution<float> pu(0.0f, 1.0f);
      std::vector<float> xyzi;
      xyzi.reserve(static_cast<std::size_t>(c.lidar_points) * 4);
      for (int p = 0; p < c.lidar_points; ++p) {
        const float az = 6.2831853f * pu(prng), el = -0.4f + 0.5f * pu(prng), range = 5.0f + 55.0f * pu(prng);
        xyzi.insert(xyzi.end(), {range * std::cos(el) * std::cos(az), range * std::cos(el) * std::sin(az), range * std::sin(el), pu(prng)});
      }
      LidarSweepRecord rec;
      rec.timestamp_start = from_micros(times[r]);
      rec.timestamp_end = from_micros(times[r] + sweep);
      rec.lidar_id = lidar_ids[k];
      rec.payload = PayloadRef::inline_data(codec, encode_points(xyzi, codec));
      rows.push_back(std::move(rec));
    }
    log.streams.push_back({ModalityKey::lidar(lidar_ids[k]), std::move(rows)});
  }

  for (std::size_t k = 0; k < camera_ids.size(); ++k) {
    const double offset = u(rng) / rig.camera_hz;
    std::vector<CameraFrameRecord> rows;
    std::int64_t r = 0;
    for (auto t : sample_times(c.start_us, rig.camera_hz, c.duration_s, offset)) {
      std::mt19937_64 prng(c.seed * 998244353ull + k * 104729ull + static_cast<std::uint64_t>(r++));
      std::vector<std::uint8_t> bytes{0xFF, 0xD8, 0xFF, 0xE0};
      for (int b = 4; b < c.camera_payload_bytes; ++b) bytes.push_back(static_cast<std::uint8_t>(prng()));
      rows.push_back({from_micros(t), camera_ids[k], PayloadRef::inline_data(Codec(CodecKind::jpeg), std::move(bytes))});
    }
    log.streams.push_back({ModalityKey::camera(camera_ids[k]), std::move(rows)});
  }

  if (rig.box_hz > 0) {
    std::vector<std::int64_t> times;
    if (!lidar_top_times.empty() && rig.box_hz <= rig.lidar_hz) {
      const auto step = static_cast<std::size_t>(std::max(1.0, std::round(rig.lidar_hz / rig.box_hz)));
      const double jitter = std::min(c.keyframe_jitter_s, 0.25 / rig.box_hz);
      for (std::size_t i = 0; i < lidar_top_times.size(); i += step) {
        const std::int64_t j = std::llround((2.0 * u(rng) - 1.0) * jitter * 1e6);
        times.push_back(std::clamp(lidar_top_times[i] + j, c.start_us, last_ego));
      }
      times.erase(std::unique(times.begin(), times.end()), times.end());
    } else {
      times = sample_times(c.start_us, rig.box_hz, c.duration_s);
    }
    std::normal_distribution<double> noise(0.0, c.box_position_noise);
    std::vector<BoxFrame> frames;
    for (auto t : times) {
      BoxFrame f{from_micros(t), {}};
      for (std::size_t i = 0; i < world.agents.size(); ++i) {
        BoxRecord b;
        b.timestamp = f.timestamp;
        b.track_id = world.agents[i].track_id;
        b.raw_label = world.agents[i].label;
        b.pose = world.agent_pose(i, rel(t));
        if (c.box_position_noise > 0) {
          const double dx = noise(rng), dy = noise(rng);
          b.pose = SE3(b.pose.translation() + Vec3(dx, dy, 0.0), b.pose.rotation());
        }
        b.extent = world.agents[i].extent;
        b.velocity = world.agent_velocity(i, rel(t));
        f.boxes.push_back(std::move(b));
      }
      frames.push_back(std::move(f));
    }
    log.streams.push_back({ModalityKey::boxes(), std::move(frames)});
  }

  if (c.map == MapTemplate::straight_road) {
    RoadMapConfig rc;
    const double reach = c.ego_path == EgoPath::line ? c.ego_speed * c.duration_s : 2 * c.ego_radius;
    rc.segments = static_cast<int>(std::ceil((reach + 100.0) / rc.segment_length));
    rc.origin = Vec2(-50.0, 0.0);
    log.map = straight_road_map(rc);
  } else if (c.map == MapTemplate::grid) {
    log.map = grid_map({3, 3, kGridBlock, kLaneWidth, false});
  }

  if (rig.traffic_light_hz > 0) {
    std::vector<std::string> lanes;
    if (log.map) {
      for (const auto& o : *log.map) {
        if (o.layer == MapLayer::lane && lanes.size() < 4) lanes.push_back(o.id);
      }
    }
    if (lanes.empty()) lanes = {"lane_0"};
    std::vector<TrafficLightFrame> frames;
    for (auto t : sample_times(c.start_us, rig.traffic_light_hz, c.duration_s)) {
      TrafficLightFrame f{from_micros(t), {}};
      for (std::size_t i = 0; i < lanes.size(); ++i) {
        const double phase = std::fmod(rel(t) + 2.5 * static_cast<double>(i), 10.0);
        const auto state = phase < 5.0 ? TrafficLightState::green : phase < 6.0 ? TrafficLightState::yellow : TrafficLightState::red;
        f.lights.push_back({f.timestamp, lanes[i], state});
      }
      frames.push_back(std::move(f));
    }
    log.streams.push_back({ModalityKey::traffic_lights(), std::move(frames)});
  }

  std::sort(log.streams.begin(), log.streams.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return log;
}

SyntheticWorld generate_synthetic(const SyntheticScenarioConfig& config, const fs::path& directory) {
  const auto world = make_synthetic_world(config);
  const auto log = generate_synthetic_log(config);
  fs::remove_all(directory);
  write_jsonl_source(log, directory);
  json_io::json gt;
  gt["log_id"] = world.config.log_id;
  gt["rig"] = world.config.rig.name;
  gt["seed"] = world.config.seed;
  gt["duration_s"] = world.config.duration_s;
  gt["start_us"] = world.config.start_us;
  gt["ego"] = {{"path", world.config.ego_path == EgoPath::line ? "line" : "circle"},
               {"speed_mps", world.config.ego_speed},
               {"radius_m", world.config.ego_radius},
               {"rate_hz", world.config.ego_hz}};
  gt["box_position_noise_m"] = world.config.box_position_noise;
  for (const auto& a : world.agents) {
    gt["agents"].push_back({{"track_id", a.track_id},
                            {"label", a.label},
                            {"motion", a.circular ? "circle" : "line"},
                            {"origin_m", {a.origin.x(), a.origin.y()}},
                            {"heading_rad", a.heading},
                            {"speed_mps", a.speed},
                            {"radius_m", a.radius}});
  }
  std::ofstream(directory / "ground_truth.json") << gt.dump(1) << '\n';
  return world;
}

}  // namespace d123
