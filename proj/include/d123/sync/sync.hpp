#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "d123/geom/time.hpp"
#include "d123/log/log_handle.hpp"
#include "d123/log/modality.hpp"

namespace d123 {

enum class MatchMode { exact, nearest, forward, backward };

std::string_view to_string(MatchMode mode);
MatchMode match_mode_from_string(std::string_view name);

struct MatchCriteria {
  MatchMode mode = MatchMode::nearest;
  // Max |t - query|; ignored by exact.
  std::optional<Duration> tolerance;

  bool operator==(const MatchCriteria&) const = default;
};

/// Row of `stream` (strictly ascending) matching `query`; nearest ties go to
/// the earlier event. nullopt when nothing qualifies.
std::optional<std::size_t> match_timestamp(std::span<const TimePoint> stream, TimePoint query,
                                           const MatchCriteria& criteria);

/// Half-open row range [first, second) with t0 <= t < t1.
std::pair<std::size_t, std::size_t> window_indices(std::span<const TimePoint> stream, TimePoint t0, TimePoint t1);

enum class SyncReference { source_keyframes, resample };

struct SyncConfig {
  SyncReference reference = SyncReference::source_keyframes;
  ModalityKey reference_modality;
  Duration period{0};  // resample only
  std::map<ModalityKey, MatchCriteria> criteria;  // per-modality overrides
  // Applies to modalities without an override. Unset: one period when
  // resampling, unlimited for keyframes.
  std::optional<Duration> default_tolerance;

  static SyncConfig keyframes(ModalityKey reference);
  static SyncConfig resample(Duration period, ModalityKey reference);

  void validate() const;
  MatchCriteria criteria_for(const ModalityKey& key) const;
  /// Name under which the table is persisted (sync_<name>.arrow).
  std::string default_name() const;

  bool operator==(const SyncConfig&) const = default;
};

std::string sync_config_to_json(const SyncConfig& config);
SyncConfig sync_config_from_json(std::string_view text);

/// Frame grid t_first + k * period for k = 0 .. floor((t_last - t_first) / period).
std::vector<TimePoint> resample_grid(TimePoint first, TimePoint last, Duration period);

struct SyncTable {
  std::vector<TimePoint> frame_timestamps;
  std::map<ModalityKey, std::vector<std::optional<std::int64_t>>> columns;
  SyncConfig config;

  std::size_t num_frames() const { return frame_timestamps.size(); }
  /// Row of `key` at `frame`; nullopt for empty cells and absent modalities.
  std::optional<std::int64_t> row(const ModalityKey& key, std::size_t frame) const;

  bool operator==(const SyncTable&) const = default;
};

/// Pure table construction over stream timestamps.
/// Errors: MissingModality, EmptyReferenceStream, InvalidArgument.
SyncTable build_sync_table(const std::map<ModalityKey, std::vector<TimePoint>>& streams, const SyncConfig& config);

/// Covers every stream of the log.
SyncTable build_sync_table(const LogHandle& log, const SyncConfig& config);

inline constexpr std::string_view kMetaSyncConfig = "d123.sync_config";

/// Writes <dir>/sync_<name>.arrow with nullable int64 row columns.
void write_sync_table(const std::filesystem::path& directory, const std::string& name, const SyncTable& table,
                      const LogMetadata& metadata);

SyncTable read_sync_table(const ipc::IpcFileReader& file);
/// Throws MissingModality when no table of that name exists.
SyncTable load_sync_table(const LogHandle& log, const std::string& name);

}  // namespace d123
