#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "d123/ipc/ipc_file.hpp"
#include "d123/log/metadata.hpp"
#include "d123/log/records.hpp"

namespace d123 {

/// Read-only view of a log directory. Opening maps every file and parses
/// schemas and footers only; timestamp columns load and are validated on
/// first use of a stream, rows are materialized one at a time.
class LogHandle {
 public:
  /// Errors: IoFailure (not a directory), CorruptFile, MetadataMismatch.
  static std::shared_ptr<LogHandle> open(const std::filesystem::path& directory);

  ~LogHandle();
  LogHandle(const LogHandle&) = delete;
  LogHandle& operator=(const LogHandle&) = delete;

  const std::filesystem::path& directory() const { return directory_; }
  const LogMetadata& metadata() const { return metadata_; }

  /// Present streams, ordered by key.
  std::vector<ModalityKey> modalities() const;
  bool has(const ModalityKey& key) const { return streams_.count(key) != 0; }
  std::int64_t row_count(const ModalityKey& key) const;

  /// Event times of a stream (lidar: sweep start). Throws MissingModality,
  /// or UnsortedTimestamps when the stored column is not strictly increasing.
  const std::vector<TimePoint>& timestamps(const ModalityKey& key) const;

  EgoStateRecord ego_state(std::int64_t row) const;
  BoxFrame boxes(std::int64_t row) const;
  TrafficLightFrame traffic_lights(std::int64_t row) const;
  CameraFrameRecord camera(const std::string& camera_id, std::int64_t row) const;
  LidarSweepRecord lidar(const std::string& lidar_id, std::int64_t row) const;

  /// Every row of one stream.
  EventStream read_stream(const ModalityKey& key) const;

  /// Persisted sync table names (file stem without the "sync_" prefix).
  std::vector<std::string> sync_names() const;
  std::shared_ptr<const ipc::IpcFileReader> sync_file(const std::string& name) const;
  std::shared_ptr<const ipc::IpcFileReader> stream_file(const ModalityKey& key) const;

  /// Decodes a lidar sweep or returns opaque bytes, resolving external
  /// payloads against the log directory.
  DecodedPayload decode(const PayloadRef& payload) const { return decode_payload(payload, directory_); }

  /// Rows materialized through the accessors above (not timestamp loads).
  std::uint64_t rows_read() const { return rows_read_.load(); }

  /// Process-wide count of LogHandle instances alive.
  static std::int64_t live_handles();
  /// Process-wide count of rows materialized by any handle.
  static std::uint64_t global_rows_read();

 private:
  struct Stream {
    std::shared_ptr<const ipc::IpcFileReader> file;
    mutable std::once_flag ts_once;
    mutable std::vector<TimePoint> ts;
  };

  LogHandle() = default;
  const Stream& stream(const ModalityKey& key) const;
  void count_row() const;

  std::filesystem::path directory_;
  LogMetadata metadata_;
  std::map<ModalityKey, std::unique_ptr<Stream>> streams_;
  std::map<std::string, std::shared_ptr<const ipc::IpcFileReader>> sync_files_;
  mutable std::atomic<std::uint64_t> rows_read_{0};
};

using LogHandlePtr = std::shared_ptr<const LogHandle>;

inline std::shared_ptr<LogHandle> open_log(const std::filesystem::path& directory) {
  return LogHandle::open(directory);
}

}  // namespace d123
