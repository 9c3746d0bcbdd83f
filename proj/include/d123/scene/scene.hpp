#pragma once

#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "d123/geom/vehicle.hpp"
#include "d123/log/log_handle.hpp"
#include "d123/map/map_store.hpp"
#include "d123/sync/sync.hpp"

namespace d123 {

inline constexpr std::size_t kDefaultLogCacheCapacity = 32;
inline constexpr std::string_view kSplitManifest = "manifest.json";

/// LRU cache of open logs keyed by directory. Handles stay valid while
/// referenced even after eviction.
class LogCache {
 public:
  explicit LogCache(std::size_t capacity = kDefaultLogCacheCapacity);

  std::shared_ptr<const LogHandle> get(const std::filesystem::path& directory);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const;
  bool contains(const std::filesystem::path& directory) const;
  std::uint64_t opens() const;
  std::uint64_t hits() const;
  /// Directories evicted so far, oldest first.
  std::vector<std::filesystem::path> evictions() const;
  void clear();

 private:
  using Entry = std::pair<std::filesystem::path, std::shared_ptr<const LogHandle>>;
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> lru_;  // front = most recent
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
  std::uint64_t opens_ = 0, hits_ = 0;
  std::vector<std::filesystem::path> evicted_;
};

/// Loaded maps shared by resolved path.
class MapCache {
 public:
  std::shared_ptr<const MapStore> get(const std::filesystem::path& path);
  std::uint64_t load_count() const;

 private:
  mutable std::mutex mu_;
  std::map<std::filesystem::path, std::shared_ptr<const MapStore>> maps_;
  std::uint64_t loads_ = 0;
};

struct SceneFilter {
  std::vector<std::string> split_names;  // empty: every split under the root
  Duration target_iteration_period = Duration{500'000};
  Duration history_duration{0};
  Duration future_duration{0};
  // Stream names ("camera_pcam_f0"), sensor ids ("lidar_top") or kinds
  // ("lidar": every stream of that kind, at least one).
  std::vector<std::string> required_modalities;
  bool shuffle = false;
  std::uint64_t seed = 0;
  std::optional<std::size_t> stride;  // frames; default scene length
  std::vector<std::string> log_ids;    // empty: all

  /// Throws InvalidFilter.
  void validate() const;
  std::int64_t history_iterations() const { return history_duration / target_iteration_period; }
  std::int64_t future_iterations() const { return future_duration / target_iteration_period; }
  std::size_t scene_length() const {
    return static_cast<std::size_t>(history_iterations() + 1 + future_iterations());
  }
};

/// Caches shared by all scenes of one query.
struct SceneContext {
  std::filesystem::path data_root;
  std::shared_ptr<LogCache> logs;
  std::shared_ptr<MapCache> maps;

  static std::shared_ptr<SceneContext> create(std::filesystem::path data_root,
                                              std::size_t log_capacity = kDefaultLogCacheCapacity);
};

/// Ego record with poses at both reference points.
struct EgoStateSE3 {
  EgoStateRecord record;
  SE3 rear_axle;
  SE3 center;

  TimePoint timestamp() const { return record.timestamp; }
  Vec3 center_3d() const { return center.translation(); }
};

/// View into a window of one log's sync table. Iteration 0 is the current
/// frame; history iterations are negative.
class SceneView {
 public:
  SceneView(std::shared_ptr<const SceneContext> context, std::filesystem::path log_dir, std::string split,
            std::shared_ptr<const SyncTable> table, std::size_t anchor_frame, std::int64_t history,
            std::int64_t future);

  const std::filesystem::path& log_dir() const { return log_dir_; }
  const std::string& split() const { return split_; }
  std::string log_id() const { return log_dir_.filename().string(); }
  std::int64_t history_iterations() const { return history_; }
  std::int64_t future_iterations() const { return future_; }
  std::size_t num_iterations() const { return static_cast<std::size_t>(history_ + 1 + future_); }
  std::size_t anchor_frame() const { return anchor_; }
  const SyncTable& sync_table() const { return *table_; }

  /// Throws IterationOutOfRange.
  std::size_t frame_at(std::int64_t iteration) const;
  TimePoint timestamp_at_iteration(std::int64_t iteration) const;

  /// nullopt when the sync cell is empty. UnknownSensorId for sensors the
  /// log does not carry.
  std::optional<EgoStateRecord> get_ego_state_at_iteration(std::int64_t iteration) const;
  std::optional<EgoStateSE3> get_ego_state_se3_at_iteration(std::int64_t iteration) const;
  std::optional<BoxFrame> get_boxes_at_iteration(std::int64_t iteration) const;
  std::optional<TrafficLightFrame> get_traffic_lights_at_iteration(std::int64_t iteration) const;
  std::optional<LidarSweepRecord> get_lidar_at_iteration(std::int64_t iteration, const std::string& lidar_id) const;
  std::optional<CameraFrameRecord> get_camera_at_iteration(std::int64_t iteration,
                                                           const std::string& camera_id) const;

  /// Native-rate lookup on the camera stream. Errors: UnknownSensorId,
  /// NoMatchWithinTolerance.
  CameraFrameRecord get_camera_at_timestamp(TimePoint timestamp, const std::string& camera_id,
                                            const MatchCriteria& criteria) const;
  CameraFrameRecord get_camera_at_timestamp(TimePoint timestamp, const std::string& camera_id,
                                            const std::string& criteria) const;

  /// Errors: MapUnavailable.
  std::shared_ptr<const MapStore> get_map_api() const;

  std::shared_ptr<const LogHandle> log() const;

 private:
  std::optional<std::int64_t> cell(const ModalityKey& key, std::int64_t iteration) const;
  void require_sensor(const ModalityKey& key) const;

  std::shared_ptr<const SceneContext> context_;
  std::filesystem::path log_dir_;
  std::string split_;
  std::shared_ptr<const SyncTable> table_;
  std::size_t anchor_;
  std::int64_t history_, future_;
};

/// Log directories of a split: the manifest's ids when present, otherwise
/// every subdirectory, sorted. Throws UnknownSplit.
std::vector<std::filesystem::path> split_logs(const std::filesystem::path& data_root, const std::string& split);
std::vector<std::string> list_splits(const std::filesystem::path& data_root);

/// Sync table of a log at a target period: a persisted table with the same
/// configuration when present, otherwise built in memory (ego reference,
/// falling back to the first stream).
SyncTable sync_table_at_period(const LogHandle& log, Duration period);

/// Errors: UnknownSplit, InvalidFilter.
std::vector<SceneView> get_filtered_scenes(const SceneFilter& filter, const std::filesystem::path& data_root);
std::vector<SceneView> get_filtered_scenes(const SceneFilter& filter, std::shared_ptr<SceneContext> context);

/// Resolves a log's map reference against the log directory, its split
/// directory and the data root.
std::optional<std::filesystem::path> resolve_map_path(const LogHandle& log, const std::filesystem::path& data_root);

}  // namespace d123
