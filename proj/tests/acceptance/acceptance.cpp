// One PASS/FAIL line per criterion; exit status 0 only when all pass.
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include "d123/analytics/analytics.hpp"
#include "d123/error.hpp"
#include "d123/geom/camera.hpp"
#include "d123/geom/vehicle.hpp"
#include "d123/ingest/convert.hpp"
#include "d123/log/log_writer.hpp"
#include "d123/map/generators.hpp"
#include "d123/map/map_store.hpp"
#include "d123/scene/scene.hpp"
#include "d123/sync/sync.hpp"

using namespace d123;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned thresholds.
constexpr double kRoundTripBudgetS = 60.0;
constexpr std::size_t kMatchCases = 100'000;
constexpr std::size_t kSyncLogs = 20;
constexpr std::size_t kResampleTrials = 1'000;
constexpr std::size_t kQueriesPerKind = 1'000;
constexpr double kMinSpeedup = 50.0;
constexpr std::size_t kWkbGeometries = 10'000;
constexpr double kConventionTol = 1e-12;
constexpr std::size_t kLazyScenes = 10'000;
constexpr std::size_t kLazyLogs = 100;
constexpr std::size_t kLazyCapacity = 32;
constexpr double kLinearSpeedTol = 1e-6;
constexpr double kCentripetalTol = 0.05;
constexpr double kJitterSigma = 0.1;
constexpr double kTailThreshold = 5.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("d123_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---- 1 ----------------------------------------------------------------------

PayloadRef inlined(const PayloadRef& p, const fs::path& base) {
  auto out = PayloadRef::inline_data(p.codec, payload_bytes(p, base));
  out.frame_index = p.frame_index;
  return out;
}

template <class R>
std::vector<R> with_inline_payloads(std::vector<R> rows, const fs::path& base) {
  for (auto& r : rows) r.payload = inlined(r.payload, base);
  return rows;
}

Outcome format_round_trip() {
  const auto t0 = Clock::now();
  const auto root = scratch("roundtrip");
  std::mt19937_64 rng(101);
  const auto& rigs = rig_presets();
  std::size_t streams = 0, payloads = 0;
  for (std::size_t i = 0; i < 50; ++i) {
    SyntheticScenarioConfig c;
    c.seed = rng();
    c.rig = rigs[i % rigs.size()];
    c.duration_s = 1.0 + static_cast<double>(rng() % 40) / 10.0;
    c.agents = static_cast<int>(rng() % 10);
    c.ego_path = rng() % 2 ? EgoPath::circle : EgoPath::line;
    if (c.rig.name == "WOD-Motion") c.ego_hz = 10.0;
    c.log_id = "rt_" + std::to_string(i);
    const auto log = generate_synthetic_log(c);
    const auto sc = root / (c.log_id + "_sc"), ex = root / (c.log_id + "_ex");
    write_log(sc, log.streams, log.metadata, {StorageMode::self_contained, log.payload_base});
    write_log(ex, log.streams, log.metadata, {StorageMode::external, log.payload_base});
    const auto hs = LogHandle::open(sc), he = LogHandle::open(ex);
    if (hs->metadata() != log.metadata || he->metadata() != log.metadata) return {false, c.log_id + ": metadata differs"};
    if (hs->modalities().size() != log.streams.size() || he->modalities().size() != log.streams.size()) {
      return {false, c.log_id + ": stream set differs"};
    }
    for (const auto& s : log.streams) {
      ++streams;
      const auto a = hs->read_stream(s.key);
      const auto b = he->read_stream(s.key);
      if (!(a == s)) return {false, c.log_id + "/" + s.key.name() + ": self-contained mismatch"};
      bool same = true;
      if (const auto* cams = std::get_if<std::vector<CameraFrameRecord>>(&s.rows)) {
        same = with_inline_payloads(std::get<std::vector<CameraFrameRecord>>(b.rows), ex) == *cams;
        payloads += cams->size();
      } else if (const auto* lids = std::get_if<std::vector<LidarSweepRecord>>(&s.rows)) {
        const auto& ext = std::get<std::vector<LidarSweepRecord>>(b.rows);
        same = with_inline_payloads(ext, ex) == *lids;
        const auto& own = std::get<std::vector<LidarSweepRecord>>(a.rows);
        for (std::size_t k = 0; same && k < ext.size(); ++k) {
          same = decode_payload(ext[k].payload, ex) == decode_payload(own[k].payload, sc);
        }
        payloads += lids->size();
      } else {
        same = b == s;
      }
      if (!same) return {false, c.log_id + "/" + s.key.name() + ": external mismatch"};
    }
  }
  const double dt = seconds_since(t0);
  fs::remove_all(root);
  return {dt < kRoundTripBudgetS, "50 logs, " + std::to_string(streams) + " streams, " + std::to_string(payloads) +
                                      " payloads, " + std::to_string(dt) + " s"};
}

// ---- 2 ----------------------------------------------------------------------

std::optional<std::size_t> scan(const std::vector<TimePoint>& s, TimePoint q, const MatchCriteria& c) {
  std::optional<std::size_t> best;
  std::int64_t best_d = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::int64_t d = (s[i] - q).count();
    const std::int64_t ad = std::llabs(d);
    const std::int64_t tol = c.tolerance ? c.tolerance->count() : std::numeric_limits<std::int64_t>::max();
    bool ok = false, better = false;
    switch (c.mode) {
      case MatchMode::exact:
        ok = d == 0;
        better = !best;
        break;
      case MatchMode::forward:
        ok = d >= 0 && d <= tol;
        better = !best || d < best_d;
        break;
      case MatchMode::backward:
        ok = d <= 0 && -d <= tol;
        better = !best || d > best_d;
        break;
      case MatchMode::nearest:
        ok = ad <= tol;
        better = !best || ad < std::llabs(best_d);
        break;
    }
    if (ok && better) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

MatchCriteria random_criteria(std::mt19937_64& rng, std::int64_t scale) {
  MatchCriteria c;
  c.mode = static_cast<MatchMode>(rng() % 4);
  if (rng() % 3) c.tolerance = Duration{static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(scale))};
  return c;
}

Outcome sync_oracle() {
  std::mt19937_64 rng(202);
  for (std::size_t i = 0; i < kMatchCases; ++i) {
    std::vector<TimePoint> s;
    const std::size_t n = rng() % 40;
    const std::int64_t gap = 1 + static_cast<std::int64_t>(rng() % 200'000);
    std::int64_t t = static_cast<std::int64_t>(rng() % 1'000'000) - 500'000;
    for (std::size_t k = 0; k < n; ++k) {
      s.push_back(from_micros(t));
      t += 1 + static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(gap));
    }
    std::int64_t q = static_cast<std::int64_t>(rng() % 3'000'000) - 1'000'000;
    if (!s.empty() && rng() % 4 == 0) q = to_micros(s[rng() % s.size()]);
    const auto c = random_criteria(rng, 2 * gap);
    if (match_timestamp(s, from_micros(q), c) != scan(s, from_micros(q), c)) {
      return {false, "case " + std::to_string(i) + " differs from linear scan"};
    }
  }

  const auto root = scratch("sync");
  const auto& rigs = rig_presets();
  std::size_t cells = 0;
  for (std::size_t i = 0; i < kSyncLogs; ++i) {
    SyntheticScenarioConfig c;
    c.seed = rng();
    c.rig = rigs[rng() % rigs.size()];
    c.duration_s = 2.0 + static_cast<double>(rng() % 60) / 10.0;
    if (c.rig.name == "WOD-Motion") c.ego_hz = 10.0;
    c.log_id = "sync_" + std::to_string(i);
    const auto parsed = generate_synthetic_log(c);
    write_log(root / c.log_id, parsed.streams, parsed.metadata, {StorageMode::self_contained, parsed.payload_base});
    const auto log = LogHandle::open(root / c.log_id);
    const auto keys = log->modalities();
    const auto ref = keys[rng() % keys.size()];
    SyncConfig config = rng() % 2 ? SyncConfig::keyframes(ref)
                                  : SyncConfig::resample(Duration{20'000 + static_cast<std::int64_t>(rng() % 980'000)}, ref);
    for (const auto& k : keys) {
      if (rng() % 2) config.criteria[k] = random_criteria(rng, 300'000);
    }
    if (rng() % 2) config.default_tolerance = Duration{static_cast<std::int64_t>(rng() % 200'000)};
    const auto table = build_sync_table(*log, config);

    const auto& rts = log->timestamps(ref);
    std::vector<TimePoint> frames;
    if (config.reference == SyncReference::source_keyframes) {
      frames = rts;
    } else {
      for (auto f = rts.front(); f <= rts.back(); f += config.period) frames.push_back(f);
    }
    if (table.frame_timestamps != frames) return {false, c.log_id + ": frame grid differs"};
    for (const auto& k : keys) {
      MatchCriteria mc;
      if (auto it = config.criteria.find(k); it != config.criteria.end()) {
        mc = it->second;
      } else {
        mc.tolerance = config.default_tolerance;
        if (!mc.tolerance && config.reference == SyncReference::resample) mc.tolerance = config.period;
      }
      const auto& ts = log->timestamps(k);
      for (std::size_t f = 0; f < frames.size(); ++f) {
        const auto want = scan(ts, frames[f], mc);
        const auto got = table.row(k, f);
        ++cells;
        if (want.has_value() != got.has_value() || (want && static_cast<std::int64_t>(*want) != *got)) {
          return {false, c.log_id + "/" + k.name() + ": cell " + std::to_string(f) + " differs"};
        }
      }
    }
  }
  fs::remove_all(root);
  return {true, std::to_string(kMatchCases) + " match cases, " + std::to_string(cells) + " sync cells on " +
                    std::to_string(kSyncLogs) + " logs"};
}

// ---- 3 ----------------------------------------------------------------------

Outcome resampling_count_law() {
  std::mt19937_64 rng(303);
  for (std::size_t i = 0; i < kResampleTrials; ++i) {
    const std::int64_t first = static_cast<std::int64_t>(rng() % 2'000'000'000'000'000ULL);
    const std::int64_t span = static_cast<std::int64_t>(rng() % 600'000'000ULL);
    const std::int64_t period = 1 + static_cast<std::int64_t>(rng() % 2'000'000ULL);
    const auto grid = resample_grid(from_micros(first), from_micros(first + span), Duration{period});
    const std::size_t expected = static_cast<std::size_t>(span / period) + 1;
    if (grid.size() != expected) {
      return {false, "trial " + std::to_string(i) + ": " + std::to_string(grid.size()) + " != " + std::to_string(expected)};
    }
    for (std::size_t k = 0; k < grid.size(); k += std::max<std::size_t>(1, grid.size() / 7)) {
      if (to_micros(grid[k]) != first + static_cast<std::int64_t>(k) * period) return {false, "grid value off"};
    }
    const std::map<ModalityKey, std::vector<TimePoint>> streams{
        {ModalityKey::ego_state(), {from_micros(first), from_micros(first + span)}}};
    if (i % 10 == 0 &&
        build_sync_table(streams, SyncConfig::resample(Duration{period}, ModalityKey::ego_state())).num_frames() != expected) {
      return {false, "sync table frame count differs"};
    }
  }
  return {true, std::to_string(kResampleTrials) + " trials exact"};
}

// ---- 4 ----------------------------------------------------------------------

std::vector<std::string> ids_of(const std::vector<const MapObject*>& objs) {
  std::vector<std::string> out;
  for (auto* o : objs) out.push_back(o->id);
  return out;
}

Outcome spatial_index_oracle() {
  std::mt19937_64 rng(404);
  const auto layers = all_map_layers();
  std::string detail;
  double speedup = 0.0;
  for (std::size_t n : {100UL, 1'000UL, 10'000UL, 100'000UL}) {
    const double extent = 10.0 * std::sqrt(static_cast<double>(n));
    auto objects = random_map_objects(n, 40 + n, extent);
    std::sort(objects.begin(), objects.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    const auto store = MapStore::from_objects(objects);
    for (auto l : layers) {
      const auto err = store->index(l).check_invariants();
      if (!err.empty()) return {false, "n=" + std::to_string(n) + " STR: " + err};
    }
    std::uniform_real_distribution<double> pos(-0.05 * extent, 1.05 * extent);
    std::uniform_real_distribution<double> rad(0.5, 60.0);
    auto pick_layers = [&] {
      std::vector<MapLayer> ls;
      for (auto l : layers) {
        if (rng() % 2) ls.push_back(l);
      }
      if (ls.empty()) ls.push_back(layers[rng() % layers.size()]);
      return ls;
    };
    auto in = [](const std::vector<MapLayer>& ls, MapLayer l) { return std::find(ls.begin(), ls.end(), l) != ls.end(); };
    std::size_t hits = 0;
    for (std::size_t q = 0; q < kQueriesPerKind; ++q) {
      const Vec2 p(pos(rng), pos(rng));
      const double r = rad(rng);
      const auto ls = pick_layers();
      std::vector<std::string> brute;
      for (const auto& o : objects) {
        if (in(ls, o.layer) && distance_xy(o.geometry, p) <= r) brute.push_back(o.id);
      }
      if (ids_of(store->objects_in_radius(p, r, ls)) != brute) return {false, "n=" + std::to_string(n) + " radius differs"};
      hits += brute.size();

      const auto layer = layers[rng() % layers.size()];
      const MapObject* best = nullptr;
      double best_d = 0;
      for (const auto& o : objects) {
        if (o.layer != layer) continue;
        const double d = distance_xy(o.geometry, p);
        if (!best || d < best_d) {
          best = &o;
          best_d = d;
        }
      }
      if (best) {
        const auto [got, d] = store->nearest(p, layer);
        if (got->id != best->id || d != best_d) return {false, "n=" + std::to_string(n) + " nearest differs"};
      }

      const double w = rad(rng) * 2, h = rad(rng) * 2;
      const Rect rect{p.x(), p.y(), p.x() + w, p.y() + h};
      std::vector<std::string> brute_rect;
      std::vector<std::size_t> brute_bbox;
      for (std::size_t k = 0; k < objects.size(); ++k) {
        if (!in(ls, objects[k].layer)) continue;
        if (intersects(objects[k].geometry, rect)) brute_rect.push_back(objects[k].id);
        if (objects[k].geometry.bbox().intersects(rect)) brute_bbox.push_back(k);
      }
      if (ids_of(store->objects_intersecting(rect, ls)) != brute_rect) return {false, "n=" + std::to_string(n) + " range differs"};
      auto bbox_hits = store->objects_in_rect(rect, ls);
      std::sort(bbox_hits.begin(), bbox_hits.end());
      if (bbox_hits != brute_bbox) return {false, "n=" + std::to_string(n) + " bbox range differs"};
    }
    detail += "n=" + std::to_string(n) + " hits=" + std::to_string(hits) + "; ";

    if (n == 100'000) {
      std::vector<double> fast, slow;
      const std::vector<MapLayer> all(layers.begin(), layers.end());
      std::size_t sink = 0;
      for (int q = 0; q < 201; ++q) {
        const Vec2 p(pos(rng), pos(rng));
        const double r = 20.0;
        auto t = Clock::now();
        sink += store->objects_in_radius(p, r, all).size();
        fast.push_back(seconds_since(t));
        t = Clock::now();
        for (const auto& o : objects) sink += distance_xy(o.geometry, p) <= r;
        slow.push_back(seconds_since(t));
      }
      std::nth_element(fast.begin(), fast.begin() + 100, fast.end());
      std::nth_element(slow.begin(), slow.begin() + 100, slow.end());
      speedup = slow[100] / fast[100];
      detail += "median radius latency " + std::to_string(fast[100] * 1e6) + " us vs brute " +
                std::to_string(slow[100] * 1e6) + " us (x" + std::to_string(speedup) + ")" + (sink ? "" : " ");
    }
  }
  return {speedup >= kMinSpeedup, detail};
}

// ---- 5 ----------------------------------------------------------------------

Geometry random_geometry(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-1e6, 1e6);
  const bool z = rng() % 2;
  auto pt = [&] { return Vec3(c(rng), c(rng), z ? c(rng) : 0.0); };
  switch (rng() % 3) {
    case 0: return Geometry::point(pt(), z);
    case 1: {
      std::vector<Vec3> pts;
      for (std::size_t i = 0, n = 2 + rng() % 20; i < n; ++i) pts.push_back(pt());
      return Geometry::linestring(pts, z);
    }
    default: {
      std::vector<std::vector<Vec3>> rings;
      for (std::size_t r = 0, nr = 1 + rng() % 4; r < nr; ++r) {
        std::vector<Vec3> ring;
        for (std::size_t i = 0, n = 3 + rng() % 12; i < n; ++i) ring.push_back(pt());
        ring.push_back(ring.front());
        rings.push_back(ring);
      }
      return Geometry::polygon(rings, z);
    }
  }
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

Outcome wkb_conformance() {
  std::mt19937_64 rng(505);
  for (std::size_t i = 0; i < kWkbGeometries; ++i) {
    const auto g = random_geometry(rng);
    const auto bytes = wkb_encode(g);
    const auto back = wkb_decode(bytes);
    if (!(back == g) || wkb_encode(back) != bytes) return {false, "geometry " + std::to_string(i) + " does not round-trip"};
  }
  std::ifstream in(fs::path(D123_FIXTURE_DIR) / "wkb_vectors.json");
  if (!in) return {false, "reference fixture missing"};
  const auto doc = nlohmann::json::parse(in);
  std::size_t vectors = 0;
  for (const auto& c : doc["cases"]) {
    const bool z = c["has_z"];
    std::vector<std::vector<Vec3>> rings;
    for (const auto& r : c["rings"]) {
      std::vector<Vec3> ring;
      for (const auto& p : r) ring.emplace_back(p[0], p[1], z ? p[2].get<double>() : 0.0);
      rings.push_back(ring);
    }
    const std::string kind = c["kind"];
    const Geometry g = kind == "point" ? Geometry::point(rings[0][0], z)
                       : kind == "linestring" ? Geometry::linestring(rings[0], z)
                                              : Geometry::polygon(rings, z);
    if (wkb_encode(g) != from_hex(c["wkb_le"])) return {false, "vector " + std::to_string(vectors) + " bytes differ"};
    if (!(wkb_decode(from_hex(c["wkb_be"])) == g)) return {false, "big-endian vector " + std::to_string(vectors)};
    ++vectors;
  }
  return {vectors > 0, std::to_string(kWkbGeometries) + " random round-trips, " + std::to_string(vectors) +
                           " reference vectors byte-equal"};
}

// ---- 6 ----------------------------------------------------------------------

Outcome conventions() {
  CameraModel cam;
  cam.fx = cam.fy = 1000;
  cam.cx = 960;
  cam.cy = 540;
  cam.width = 1920;
  cam.height = 1080;
  cam.extrinsic = SE3(Vec3::Zero(), camera_convention_rotation());
  // body x forward, y left, z up; camera x right, y down, z forward
  const std::pair<Vec3, Vec3> forced[] = {
      {Vec3(1, 0, 0), Vec3(0, 0, 1)},   // forward -> +z
      {Vec3(0, 1, 0), Vec3(-1, 0, 0)},  // left -> -x (right is +x)
      {Vec3(0, 0, 1), Vec3(0, -1, 0)},  // up -> -y (down is +y)
      {Vec3(0, -1, 0), Vec3(1, 0, 0)},
      {Vec3(0, 0, -1), Vec3(0, 1, 0)},
  };
  for (const auto& [b, c] : forced) {
    if ((body_point_in_camera(b, cam) - c).norm() > kConventionTol) return {false, "axis mapping differs"};
  }
  // a point ahead and to the right projects right of the principal point
  const Vec3 pc = body_point_in_camera(Vec3(10, -1, 0), cam);
  const auto proj = project(cam, std::span<const Vec3>(&pc, 1));
  if (!(proj.pixels[0].x() > cam.cx)) return {false, "right-of-center point projects left"};

  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = 0;
  for (int i = 0; i < 10'000; ++i) {
    VehicleParameters v;
    v.rear_axle_to_center = 0.5 + (u(rng) + 1.0);
    Eigen::Quaterniond q(u(rng), u(rng), u(rng), u(rng));
    q.normalize();
    const SE3 p(Vec3(u(rng) * 1e3, u(rng) * 1e3, u(rng) * 10), q);
    const SE3 back = convert_reference(convert_reference(p, v, ReferencePoint::rear_axle, ReferencePoint::center), v,
                                       ReferencePoint::center, ReferencePoint::rear_axle);
    worst = std::max({worst, (back.translation() - p.translation()).norm(), rotation_angle_between(back, p)});
  }
  return {worst <= kConventionTol, "forced axis examples hold; worst rear-axle/center round-trip error " + std::to_string(worst)};
}

// ---- 7 ----------------------------------------------------------------------

Outcome scene_laziness() {
  const auto root = scratch("lazy");
  build_synthetic_corpus(root, {{"train", "WOD-Motion", static_cast<int>(kLazyLogs), 10.0, 7, EgoPath::line, MapTemplate::none}});
  SceneFilter f;
  f.split_names = {"train"};
  f.target_iteration_period = Duration{100'000};
  const auto rows_before = LogHandle::global_rows_read();
  const auto ctx = SceneContext::create(root, kLazyCapacity);
  const auto scenes = get_filtered_scenes(f, ctx);
  const auto rows_after = LogHandle::global_rows_read();
  const auto live = LogHandle::live_handles();
  const auto cached = ctx->logs->size();
  std::string detail = std::to_string(scenes.size()) + " scenes over " + std::to_string(kLazyLogs) + " logs, " +
                       std::to_string(cached) + " cached / " + std::to_string(live) + " live handles, " +
                       std::to_string(rows_after - rows_before) + " rows read at instantiation";
  bool ok = scenes.size() >= kLazyScenes && rows_after == rows_before && cached <= kLazyCapacity &&
            live <= static_cast<std::int64_t>(kLazyCapacity);
  std::mt19937_64 rng(7);
  std::int64_t max_live = live;
  for (int i = 0; i < 500; ++i) {
    const auto& s = scenes[rng() % scenes.size()];
    ok = ok && s.get_ego_state_at_iteration(0).has_value();
    max_live = std::max(max_live, LogHandle::live_handles());
  }
  const auto touched = LogHandle::global_rows_read() - rows_after;
  ok = ok && touched > 0 && max_live <= static_cast<std::int64_t>(kLazyCapacity);
  detail += "; after 500 accesses " + std::to_string(touched) + " rows, max live " + std::to_string(max_live);
  fs::remove_all(root);
  return {ok, detail};
}

// ---- 8 ----------------------------------------------------------------------

BoxRecord box(std::int64_t us, double x, double y) {
  BoxRecord b;
  b.timestamp = from_micros(us);
  b.track_id = "t";
  b.raw_label = "car";
  b.pose = SE3::from_translation(x, y, 0);
  return b;
}

Outcome annotation_pipeline() {
  // closed forms at 10 Hz
  std::vector<BoxRecord> line, circle;
  for (int i = 0; i < 100; ++i) {
    const double t = 0.1 * i;
    line.push_back(box(100'000LL * i, 3 + 10 * t * std::cos(0.7), -2 + 10 * t * std::sin(0.7)));
    circle.push_back(box(100'000LL * i, 20 * std::cos(0.5 * t), 20 * std::sin(0.5 * t)));
  }
  double lin_err = 0, lin_acc = 0, circ_err = 0;
  for (const auto& s : track_kinematics(line, {}).samples) {
    lin_err = std::max(lin_err, std::abs(*s.speed - 10.0));
    lin_acc = std::max(lin_acc, std::abs(*s.acceleration));
  }
  for (const auto& s : track_kinematics(circle, {}).samples) {
    circ_err = std::max(circ_err, std::abs(std::abs(*s.acceleration) - 5.0));
  }

  // paired populations
  const auto root = scratch("pipeline");
  std::vector<fs::path> clean, noisy;
  double gen_line_err = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    SyntheticScenarioConfig c;
    c.seed = 800 + seed;
    c.rig = rig_preset("KITTI-360");  // 10 Hz boxes
    c.duration_s = 20;
    c.agents = 16;
    c.log_id = "clean_" + std::to_string(seed);
    convert(generate_synthetic_log(c), root / c.log_id);
    clean.push_back(root / c.log_id);
    const auto world = make_synthetic_world(c);
    const auto log = LogHandle::open(root / c.log_id);
    for (const auto& k : log_kinematics(*log)) {
      for (const auto& a : world.agents) {
        if (a.track_id != k.track_id || a.circular) continue;
        for (const auto& s : k.samples) gen_line_err = std::max(gen_line_err, std::abs(*s.speed - a.speed));
      }
    }
    c.box_position_noise = kJitterSigma;
    c.log_id = "noisy_" + std::to_string(seed);
    convert(generate_synthetic_log(c), root / c.log_id);
    noisy.push_back(root / c.log_id);
  }
  const auto tax = TaxonomyMap::default_map(UnmappedPolicy::error);
  auto tail = [&](const std::vector<fs::path>& logs) {
    const auto set = build_histograms(logs, tax);
    double mass = 0, total = 0;
    for (const auto& [key, h] : set.histograms) {
      if (std::get<2>(key) != Quantity::acceleration) continue;
      mass += h.tail_mass(kTailThreshold) * static_cast<double>(h.total());
      total += static_cast<double>(h.total());
    }
    return total > 0 ? mass / total : 0.0;
  };
  const double tail_clean = tail(clean), tail_noisy = tail(noisy);
  fs::remove_all(root);
  const bool ok = tail_noisy > tail_clean && lin_err <= kLinearSpeedTol && lin_acc <= kLinearSpeedTol &&
                  circ_err <= kCentripetalTol && gen_line_err <= kLinearSpeedTol;
  return {ok, "tail mass |a|>5: clean " + std::to_string(tail_clean) + " vs jittered " + std::to_string(tail_noisy) +
                  "; linear speed err " + std::to_string(lin_err) + " (generated tracks " + std::to_string(gen_line_err) +
                  "); centripetal err " + std::to_string(circ_err)};
}

// ---- 9 ----------------------------------------------------------------------

Outcome listing_parity() {
  const auto root = scratch("listing");
  build_synthetic_corpus(root, {{"av2-sensor_train", "AV2", 2, 20.0, 1},
                                {"nuscenes_train", "nuScenes", 2, 20.0, 2},
                                {"wod-perception_train", "WOD-Perception", 2, 20.0, 3}});
  SceneFilter f;
  f.split_names = {"av2-sensor_train", "nuscenes_train", "wod-perception_train"};
  f.target_iteration_period = seconds_to_duration(0.5);
  f.future_duration = seconds_to_duration(4.0);
  f.history_duration = seconds_to_duration(1.0);
  f.shuffle = true;
  const auto scenes = get_filtered_scenes(f, root);
  if (scenes.empty()) return {false, "no scenes"};

  // expected scene count: per log, frames on the 0.5 s grid over ego, windows of 11 frames
  std::size_t expected = 0;
  for (const auto& split : f.split_names) {
    for (const auto& dir : split_logs(root, split)) {
      const auto log = LogHandle::open(dir);
      const auto& ego = log->timestamps(ModalityKey::ego_state());
      const std::int64_t frames = (ego.back() - ego.front()).count() / 500'000 + 1;
      for (std::int64_t a = 2; a + 8 < frames; a += 11) ++expected;
    }
  }
  if (scenes.size() != expected) {
    return {false, std::to_string(scenes.size()) + " scenes, expected " + std::to_string(expected)};
  }

  std::size_t checked = 0, objects = 0;
  std::set<std::string> datasets;
  for (const auto& scene : scenes) {
    const auto log = scene.log();
    const auto ego = scene.get_ego_state_se3_at_iteration(0);
    const auto lidar = scene.get_lidar_at_iteration(0, "lidar_top");
    if (!ego || !lidar) return {false, scene.log_id() + ": missing ego or lidar"};
    const TimePoint t = scene.timestamp_at_iteration(0);
    const MatchCriteria within{MatchMode::nearest, seconds_to_duration(0.5)};
    const auto ego_row = scan(log->timestamps(ModalityKey::ego_state()), t, within);
    const auto lidar_row = scan(log->timestamps(ModalityKey::lidar("lidar_top")), t, within);
    if (!ego_row || !(log->ego_state(static_cast<std::int64_t>(*ego_row)) == ego->record)) return {false, "ego row differs"};
    if (!lidar_row || !(log->lidar("lidar_top", static_cast<std::int64_t>(*lidar_row)) == *lidar)) return {false, "lidar row differs"};
    const double off = *log->metadata().vehicle.rear_axle_to_center;
    const Vec3 center = ego->record.pose.translation() + ego->record.pose.rotation_matrix().col(0) * off;
    if ((ego->center_3d() - center).norm() > 1e-9) return {false, "ego center differs"};

    const auto camera = scene.get_camera_at_timestamp(lidar->timestamp_start, "pcam_f0", "nearest");
    const auto cam_row = scan(log->timestamps(ModalityKey::camera("pcam_f0")), lidar->timestamp_start, {});
    if (!(log->camera("pcam_f0", static_cast<std::int64_t>(*cam_row)) == camera)) return {false, "camera row differs"};

    const auto map_api = scene.get_map_api();
    const auto nearby = map_api->objects_in_radius(ego->center_3d(), 50.0, std::vector<std::string>{"lane", "crosswalk"});
    std::vector<std::string> brute;
    for (const auto& o : map_api->all_objects()) {
      if ((o.layer == MapLayer::lane || o.layer == MapLayer::crosswalk) &&
          distance_xy(o.geometry, ego->center_3d().head<2>()) <= 50.0) {
        brute.push_back(o.id);
      }
    }
    if (ids_of(nearby) != brute) return {false, "map radius query differs"};
    if (nearby.empty()) return {false, scene.log_id() + ": empty map query"};
    objects += nearby.size();
    datasets.insert(log->metadata().dataset);
    ++checked;
  }
  fs::remove_all(root);
  return {datasets.size() == 3, std::to_string(checked) + " scenes from " + std::to_string(datasets.size()) +
                                    " rigs verified; " + std::to_string(objects) + " lane/crosswalk hits"};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"format round-trip", format_round_trip},
      {"sync oracle", sync_oracle},
      {"resampling count law", resampling_count_law},
      {"spatial-index oracle", spatial_index_oracle},
      {"WKB conformance", wkb_conformance},
      {"convention checks", conventions},
      {"scene-API laziness", scene_laziness},
      {"annotation statistics pipeline", annotation_pipeline},
      {"listing parity", listing_parity},
  };
  int failed = 0, n = 0;
  for (const auto& [name, fn] : criteria) {
    ++n;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << n << " " << name << " (" << seconds_since(t0) << " s): " << o.detail
              << std::endl;
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
