#include "d123/ingest/convert.hpp"

#include <algorithm>
#include <map>
#include <unistd.h>

#include "d123/error.hpp"
#include "d123/map/map_store.hpp"
#include "d123/sync/sync.hpp"

namespace d123 {

namespace fs = std::filesystem;

ModalityKey keyframe_reference(const std::vector<ModalityKey>& keys) {
  if (keys.empty()) throw Error(ErrorCode::missing_modality, "no streams to pick a keyframe reference from");
  auto has = [&](const ModalityKey& k) { return std::find(keys.begin(), keys.end(), k) != keys.end(); };
  if (has(ModalityKey::boxes())) return ModalityKey::boxes();
  for (const auto& k : keys) {
    if (k.kind == ModalityKind::lidar) return k;
  }
  if (has(ModalityKey::ego_state())) return ModalityKey::ego_state();
  return keys.front();
}

std::vector<BoxFrame> interpolate_box_frames(const std::vector<BoxFrame>& frames, Duration period) {
  if (period.count() <= 0) throw Error(ErrorCode::invalid_argument, "interpolation period must be positive");
  if (frames.size() < 2) return frames;
  // Per track: observations in time order.
  std::map<std::string, std::vector<const BoxRecord*>> tracks;
  for (const auto& f : frames) {
    for (const auto& b : f.boxes) tracks[b.track_id].push_back(&b);
  }
  std::vector<BoxFrame> out;
  const TimePoint first = frames.front().timestamp;
  std::size_t next = 0;
  for (TimePoint t = first;; t += period) {
    const TimePoint limit = t > frames.back().timestamp ? TimePoint::max() : t;
    while (next < frames.size() && frames[next].timestamp <= limit) out.push_back(frames[next++]);
    if (t > frames.back().timestamp) break;
    if (!out.empty() && out.back().timestamp == t) continue;
    BoxFrame f{t, {}};
    for (const auto& [id, obs] : tracks) {
      if (obs.front()->timestamp > t || obs.back()->timestamp < t) continue;
      auto it = std::lower_bound(obs.begin(), obs.end(), t, [](const BoxRecord* b, TimePoint q) { return b->timestamp < q; });
      const BoxRecord& b1 = **it;
      if (b1.timestamp == t) {
        f.boxes.push_back(b1);
        f.boxes.back().timestamp = t;
        continue;
      }
      const BoxRecord& b0 = **(it - 1);
      const double s = static_cast<double>((t - b0.timestamp).count()) / static_cast<double>((b1.timestamp - b0.timestamp).count());
      BoxRecord b = b0;
      b.timestamp = t;
      b.pose = SE3((1 - s) * b0.pose.translation() + s * b1.pose.translation(),
                   b0.pose.rotation().slerp(s, b1.pose.rotation()).normalized());
      b.extent = (1 - s) * b0.extent + s * b1.extent;
      if (b0.velocity && b1.velocity) b.velocity = (1 - s) * *b0.velocity + s * *b1.velocity;
      else b.velocity.reset();
      f.boxes.push_back(std::move(b));
    }
    out.push_back(std::move(f));
  }
  std::stable_sort(out.begin(), out.end(), [](const BoxFrame& a, const BoxFrame& b) { return a.timestamp < b.timestamp; });
  return out;
}

ParsedLog parsed_from_log(const fs::path& log_dir) {
  const auto handle = LogHandle::open(log_dir);
  ParsedLog out;
  out.metadata = handle->metadata();
  out.payload_base = log_dir;
  for (const auto& key : handle->modalities()) out.streams.push_back(handle->read_stream(key));
  if (out.metadata.map_ref) {
    const fs::path map = log_dir / *out.metadata.map_ref;
    if (fs::exists(map)) out.map = MapStore::load(map)->all_objects();
  }
  return out;
}

ConvertResult convert(const ParsedLog& input, const fs::path& out_dir, const ConvertOptions& options) {
  const ParsedLog* log = &input;
  ParsedLog densified;
  if (options.interpolate_boxes) {
    if (const auto* s = input.stream(ModalityKey::boxes())) {
      densified = input;
      for (auto& st : densified.streams) {
        if (st.key == ModalityKey::boxes()) {
          st.rows = interpolate_box_frames(std::get<std::vector<BoxFrame>>(s->rows), *options.interpolate_boxes);
        }
      }
      log = &densified;
    }
  }

  const fs::path target = fs::absolute(out_dir).lexically_normal();
  const fs::path parent = target.parent_path();
  fs::create_directories(parent);
  const fs::path tmp = parent / ("." + target.filename().string() + ".tmp-" + std::to_string(::getpid()));
  fs::remove_all(tmp);

  ConvertResult result;
  result.directory = target;
  try {
    WriteOptions wo;
    wo.mode = options.mode;
    wo.payload_base = log->payload_base;
    write_log(tmp, log->streams, log->metadata, wo);
    for (const auto& s : log->streams) result.row_counts.emplace_back(s.key, s.size());
    if (log->map) {
      const auto store = MapStore::from_objects(*log->map, MapScope::per_log);
      store->write(tmp / (log->metadata.map_ref ? *log->metadata.map_ref : std::string("map.arrow")));
      result.map_objects = store->size();
      result.map_issues = store->validate().size();
    }
    if (options.write_sync && !log->streams.empty()) {
      std::vector<ModalityKey> keys;
      for (const auto& s : log->streams) keys.push_back(s.key);
      const auto handle = LogHandle::open(tmp);
      const auto config = SyncConfig::keyframes(keyframe_reference(keys));
      const auto table = build_sync_table(*handle, config);
      result.sync_name = config.default_name();
      write_sync_table(tmp, result.sync_name, table, log->metadata);
    }
    fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
  return result;
}

std::vector<fs::path> build_synthetic_corpus(const fs::path& root, const std::vector<CorpusSplit>& splits,
                                            const ConvertOptions& options) {
  std::vector<fs::path> out;
  for (const auto& sp : splits) {
    for (int i = 0; i < sp.logs; ++i) {
      SyntheticScenarioConfig cfg;
      cfg.rig = rig_preset(sp.rig);
      cfg.seed = sp.seed + static_cast<std::uint64_t>(i);
      cfg.duration_s = sp.duration_s;
      cfg.ego_path = sp.ego_path;
      cfg.map = sp.map;
      if (cfg.rig.name == "WOD-Motion") cfg.ego_hz = 10.0;
      const auto log = generate_synthetic_log(cfg);
      const fs::path dir = root / sp.split / log.metadata.log_id;
      convert(log, dir, options);
      out.push_back(dir);
    }
  }
  return out;
}

}  // namespace d123
