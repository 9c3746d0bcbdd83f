#include "d123/scene/scene.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <random>

#include "d123/error.hpp"

namespace d123 {

namespace fs = std::filesystem;

LogCache::LogCache(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw Error(ErrorCode::invalid_argument, "log cache capacity must be positive");
}

std::shared_ptr<const LogHandle> LogCache::get(const fs::path& directory) {
  const std::string key = directory.lexically_normal().string();
  std::lock_guard lock(mu_);
  if (auto it = index_.find(key); it != index_.end()) {
    lru_.splice(lru_.begin(), lru_, it->second);
    ++hits_;
    return it->second->second;
  }
  // Evict before opening so the open count never exceeds capacity.
  while (lru_.size() >= capacity_) {
    evicted_.push_back(lru_.back().first);
    index_.erase(lru_.back().first.string());
    lru_.pop_back();
  }
  std::shared_ptr<const LogHandle> handle = LogHandle::open(directory);
  ++opens_;
  lru_.emplace_front(fs::path(key), handle);
  index_[key] = lru_.begin();
  return handle;
}

std::size_t LogCache::size() const {
  std::lock_guard lock(mu_);
  return lru_.size();
}

bool LogCache::contains(const fs::path& directory) const {
  std::lock_guard lock(mu_);
  return index_.count(directory.lexically_normal().string()) != 0;
}

std::uint64_t LogCache::opens() const {
  std::lock_guard lock(mu_);
  return opens_;
}

std::uint64_t LogCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::vector<fs::path> LogCache::evictions() const {
  std::lock_guard lock(mu_);
  return evicted_;
}

void LogCache::clear() {
  std::lock_guard lock(mu_);
  lru_.clear();
  index_.clear();
}

std::shared_ptr<const MapStore> MapCache::get(const fs::path& path) {
  const fs::path key = fs::weakly_canonical(path);
  std::lock_guard lock(mu_);
  if (auto it = maps_.find(key); it != maps_.end()) return it->second;
  auto store = MapStore::load(key);
  ++loads_;
  maps_.emplace(key, store);
  return store;
}

std::uint64_t MapCache::load_count() const {
  std::lock_guard lock(mu_);
  return loads_;
}

void SceneFilter::validate() const {
  if (target_iteration_period.count() <= 0) throw Error(ErrorCode::invalid_filter, "iteration period must be positive");
  if (history_duration.count() < 0 || future_duration.count() < 0) {
    throw Error(ErrorCode::invalid_filter, "durations must be non-negative");
  }
  if (stride && *stride == 0) throw Error(ErrorCode::invalid_filter, "stride must be positive");
  for (const auto& m : required_modalities) {
    if (m.empty()) throw Error(ErrorCode::invalid_filter, "empty required modality name");
  }
}

std::shared_ptr<SceneContext> SceneContext::create(fs::path data_root, std::size_t log_capacity) {
  auto ctx = std::make_shared<SceneContext>();
  ctx->data_root = std::move(data_root);
  ctx->logs = std::make_shared<LogCache>(log_capacity);
  ctx->maps = std::make_shared<MapCache>();
  return ctx;
}

SceneView::SceneView(std::shared_ptr<const SceneContext> context, fs::path log_dir, std::string split,
                     std::shared_ptr<const SyncTable> table, std::size_t anchor_frame, std::int64_t history,
                     std::int64_t future)
    : context_(std::move(context)),
      log_dir_(std::move(log_dir)),
      split_(std::move(split)),
      table_(std::move(table)),
      anchor_(anchor_frame),
      history_(history),
      future_(future) {}

std::shared_ptr<const LogHandle> SceneView::log() const { return context_->logs->get(log_dir_); }

std::size_t SceneView::frame_at(std::int64_t iteration) const {
  if (iteration < -history_ || iteration > future_) {
    throw Error(ErrorCode::iteration_out_of_range, "iteration " + std::to_string(iteration) + " outside [" +
                                                       std::to_string(-history_) + ", " + std::to_string(future_) + "]");
  }
  return static_cast<std::size_t>(static_cast<std::int64_t>(anchor_) + iteration);
}

TimePoint SceneView::timestamp_at_iteration(std::int64_t iteration) const {
  return table_->frame_timestamps[frame_at(iteration)];
}

void SceneView::require_sensor(const ModalityKey& key) const {
  if (table_->columns.count(key)) return;
  const auto handle = log();
  const auto& meta = handle->metadata();
  const bool known = key.kind == ModalityKind::camera ? meta.cameras.count(key.sensor_id) != 0
                                                      : meta.lidars.count(key.sensor_id) != 0;
  if (!known) throw Error(ErrorCode::unknown_sensor_id, "log " + log_id() + " has no sensor '" + key.sensor_id + "'");
}

std::optional<std::int64_t> SceneView::cell(const ModalityKey& key, std::int64_t iteration) const {
  const std::size_t frame = frame_at(iteration);
  if (key.is_sensor()) require_sensor(key);
  return table_->row(key, frame);
}

std::optional<EgoStateRecord> SceneView::get_ego_state_at_iteration(std::int64_t iteration) const {
  const auto row = cell(ModalityKey::ego_state(), iteration);
  if (!row) return std::nullopt;
  return log()->ego_state(*row);
}

std::optional<EgoStateSE3> SceneView::get_ego_state_se3_at_iteration(std::int64_t iteration) const {
  const auto row = cell(ModalityKey::ego_state(), iteration);
  if (!row) return std::nullopt;
  const auto handle = log();
  EgoStateSE3 out;
  out.record = handle->ego_state(*row);
  const auto& vehicle = handle->metadata().vehicle;
  out.rear_axle = pose_at_reference(out.record.pose, vehicle, ReferencePoint::rear_axle);
  out.center = pose_at_reference(out.record.pose, vehicle, ReferencePoint::center);
  return out;
}

std::optional<BoxFrame> SceneView::get_boxes_at_iteration(std::int64_t iteration) const {
  const auto row = cell(ModalityKey::boxes(), iteration);
  if (!row) return std::nullopt;
  return log()->boxes(*row);
}

std::optional<TrafficLightFrame> SceneView::get_traffic_lights_at_iteration(std::int64_t iteration) const {
  const auto row = cell(ModalityKey::traffic_lights(), iteration);
  if (!row) return std::nullopt;
  return log()->traffic_lights(*row);
}

std::optional<LidarSweepRecord> SceneView::get_lidar_at_iteration(std::int64_t iteration,
                                                                  const std::string& lidar_id) const {
  const auto row = cell(ModalityKey::lidar(lidar_id), iteration);
  if (!row) return std::nullopt;
  return log()->lidar(lidar_id, *row);
}

std::optional<CameraFrameRecord> SceneView::get_camera_at_iteration(std::int64_t iteration,
                                                                    const std::string& camera_id) const {
  const auto row = cell(ModalityKey::camera(camera_id), iteration);
  if (!row) return std::nullopt;
  return log()->camera(camera_id, *row);
}

CameraFrameRecord SceneView::get_camera_at_timestamp(TimePoint timestamp, const std::string& camera_id,
                                                     const MatchCriteria& criteria) const {
  const auto handle = log();
  const auto key = ModalityKey::camera(camera_id);
  if (!handle->has(key)) {
    throw Error(ErrorCode::unknown_sensor_id, "log " + log_id() + " has no camera '" + camera_id + "'");
  }
  const auto& ts = handle->timestamps(key);
  const auto row = match_timestamp(ts, timestamp, criteria);
  if (!row) {
    throw Error(ErrorCode::no_match_within_tolerance,
                "no " + std::string(to_string(criteria.mode)) + " frame of camera '" + camera_id + "' for t=" +
                    std::to_string(to_micros(timestamp)) + "us");
  }
  return handle->camera(camera_id, static_cast<std::int64_t>(*row));
}

CameraFrameRecord SceneView::get_camera_at_timestamp(TimePoint timestamp, const std::string& camera_id,
                                                     const std::string& criteria) const {
  return get_camera_at_timestamp(timestamp, camera_id, MatchCriteria{match_mode_from_string(criteria), std::nullopt});
}

std::optional<fs::path> resolve_map_path(const LogHandle& log, const fs::path& data_root) {
  const auto& ref = log.metadata().map_ref;
  if (!ref || ref->empty()) return std::nullopt;
  const fs::path p(*ref);
  std::vector<fs::path> candidates;
  if (p.is_absolute()) {
    candidates.push_back(p);
  } else {
    candidates = {log.directory() / p, log.directory().parent_path() / p};
    if (!data_root.empty()) {
      candidates.push_back(data_root / p);
      candidates.push_back(data_root / "maps" / p);
    }
  }
  for (const auto& c : candidates) {
    std::error_code ec;
    if (fs::is_regular_file(c, ec)) return c;
  }
  return std::nullopt;
}

std::shared_ptr<const MapStore> SceneView::get_map_api() const {
  const auto handle = log();
  if (!handle->metadata().map_ref) throw Error(ErrorCode::map_unavailable, "log " + log_id() + " has no map reference");
  const auto path = resolve_map_path(*handle, context_->data_root);
  if (!path) {
    throw Error(ErrorCode::map_unavailable, "map '" + *handle->metadata().map_ref + "' of log " + log_id() + " not found");
  }
  return context_->maps->get(*path);
}

std::vector<std::string> list_splits(const fs::path& data_root) {
  std::error_code ec;
  if (!fs::is_directory(data_root, ec)) throw Error(ErrorCode::io_failure, "data root " + data_root.string() + " is not a directory");
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(data_root)) {
    if (e.is_directory() && e.path().filename() != "maps") out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<fs::path> split_logs(const fs::path& data_root, const std::string& split) {
  const fs::path dir = data_root / split;
  std::error_code ec;
  if (split.empty() || !fs::is_directory(dir, ec)) throw Error(ErrorCode::unknown_split, "no split '" + split + "' under " + data_root.string());
  std::vector<fs::path> out;
  const fs::path manifest = dir / kSplitManifest;
  if (fs::is_regular_file(manifest, ec)) {
    std::ifstream in(manifest);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::corrupt_file, manifest.string() + ": " + e.what());
    }
    if (!j.is_array()) throw Error(ErrorCode::corrupt_file, manifest.string() + ": expected a list of log ids");
    for (const auto& id : j) {
      if (!id.is_string()) throw Error(ErrorCode::corrupt_file, manifest.string() + ": log ids must be strings");
      const fs::path log = dir / id.get<std::string>();
      if (!fs::is_directory(log, ec)) throw Error(ErrorCode::io_failure, "manifest lists missing log " + log.string());
      out.push_back(log);
    }
  } else {
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_directory()) out.push_back(e.path());
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SyncTable sync_table_at_period(const LogHandle& log, Duration period) {
  const auto mods = log.modalities();
  if (mods.empty()) throw Error(ErrorCode::missing_modality, "log " + log.directory().string() + " has no streams");
  const ModalityKey ref = log.has(ModalityKey::ego_state()) ? ModalityKey::ego_state() : mods.front();
  const auto config = SyncConfig::resample(period, ref);
  const auto name = config.default_name();
  const auto names = log.sync_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) {
    auto table = load_sync_table(log, name);
    if (table.config == config) return table;
  }
  return build_sync_table(log, config);
}

namespace {

// Stream keys a required-modality entry stands for in one log; empty when
// the log cannot satisfy it.
std::vector<ModalityKey> required_keys(const std::string& name, const SyncTable& table) {
  std::vector<ModalityKey> out;
  for (const auto& [key, _] : table.columns) {
    if (key.name() == name) return {key};
  }
  for (const auto& [key, _] : table.columns) {
    if (key.is_sensor() && key.sensor_id == name) return {key};
  }
  for (const auto& [key, _] : table.columns) {
    if (to_string(key.kind) == name) out.push_back(key);
  }
  return out;
}

}  // namespace

std::vector<SceneView> get_filtered_scenes(const SceneFilter& filter, std::shared_ptr<SceneContext> context) {
  filter.validate();
  const auto splits = filter.split_names.empty() ? list_splits(context->data_root) : filter.split_names;
  std::vector<std::pair<std::string, fs::path>> logs;
  for (const auto& split : splits) {
    for (auto& log : split_logs(context->data_root, split)) {
      if (!filter.log_ids.empty() &&
          std::find(filter.log_ids.begin(), filter.log_ids.end(), log.filename().string()) == filter.log_ids.end()) {
        continue;
      }
      logs.emplace_back(split, std::move(log));
    }
  }

  const std::int64_t history = filter.history_iterations();
  const std::int64_t future = filter.future_iterations();
  const std::size_t length = filter.scene_length();
  const std::size_t stride = filter.stride.value_or(length);
  std::vector<SceneView> scenes;
  for (const auto& [split, dir] : logs) {
    std::shared_ptr<const SyncTable> table;
    {
      const auto handle = context->logs->get(dir);
      if (handle->modalities().empty()) continue;
      try {
        table = std::make_shared<const SyncTable>(sync_table_at_period(*handle, filter.target_iteration_period));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::empty_reference_stream) continue;
        throw;
      }
    }
    std::vector<std::vector<ModalityKey>> required;
    bool satisfiable = true;
    for (const auto& name : filter.required_modalities) {
      required.push_back(required_keys(name, *table));
      satisfiable = satisfiable && !required.back().empty();
    }
    if (!satisfiable) continue;
    for (std::size_t start = 0; start + length <= table->num_frames(); start += stride) {
      bool ok = true;
      for (const auto& keys : required) {
        for (const auto& key : keys) {
          const auto& col = table->columns.at(key);
          for (std::size_t f = start; ok && f < start + length; ++f) ok = col[f].has_value();
        }
      }
      if (ok) scenes.emplace_back(context, dir, split, table, start + static_cast<std::size_t>(history), history, future);
    }
  }

  if (filter.shuffle) {
    std::mt19937_64 rng(filter.seed);
    for (std::size_t i = scenes.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(scenes[i - 1], scenes[j]);
    }
  }
  return scenes;
}

std::vector<SceneView> get_filtered_scenes(const SceneFilter& filter, const fs::path& data_root) {
  return get_filtered_scenes(filter, SceneContext::create(data_root));
}

}  // namespace d123
