#include "d123/log/log_writer.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <map>
#include <set>

#include "d123/error.hpp"
#include "d123/ipc/ipc_file.hpp"
#include "stream_schema.hpp"

namespace d123 {

namespace fs = std::filesystem;

std::string_view to_string(StorageMode mode) {
  return mode == StorageMode::external ? "external" : "self-contained";
}

StorageMode storage_mode_from_string(std::string_view name) {
  if (name == "external") return StorageMode::external;
  if (name == "self-contained" || name == "self_contained") return StorageMode::self_contained;
  throw Error(ErrorCode::invalid_argument, "unknown storage mode '" + std::string(name) + "'");
}

namespace {

class DirectoryLock {
 public:
  explicit DirectoryLock(const fs::path& dir) : path_(dir / kLockFileName) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) throw Error(ErrorCode::io_failure, "log directory is locked by another writer: " + dir.string());
    ::close(fd);
  }
  ~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  fs::path path_;
};

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
}

bool kind_matches(ModalityKind kind, const StreamRows& rows) {
  switch (kind) {
    case ModalityKind::ego_state: return std::holds_alternative<std::vector<EgoStateRecord>>(rows);
    case ModalityKind::boxes: return std::holds_alternative<std::vector<BoxFrame>>(rows);
    case ModalityKind::traffic_lights: return std::holds_alternative<std::vector<TrafficLightFrame>>(rows);
    case ModalityKind::camera: return std::holds_alternative<std::vector<CameraFrameRecord>>(rows);
    case ModalityKind::lidar: return std::holds_alternative<std::vector<LidarSweepRecord>>(rows);
  }
  return false;
}

void check_record(const EventStream&, const EgoStateRecord& r) {
  if (!r.pose.translation().allFinite() || !r.velocity_body.allFinite() || !r.acceleration_body.allFinite() ||
      !std::isfinite(r.angular_velocity_z)) {
    throw Error(ErrorCode::invalid_argument, "non-finite ego state");
  }
}

void check_record(const EventStream&, const BoxFrame& f) {
  for (const auto& b : f.boxes) {
    if (b.timestamp != f.timestamp) throw Error(ErrorCode::invalid_argument, "box timestamp differs from its frame");
    if (b.raw_label.empty()) throw Error(ErrorCode::invalid_argument, "box with empty label");
    if (!(b.extent.array() > 0.0).all() || !b.extent.allFinite()) {
      throw Error(ErrorCode::invalid_argument, "box extent must be positive");
    }
  }
}

void check_record(const EventStream&, const TrafficLightFrame& f) {
  for (const auto& l : f.lights) {
    if (l.timestamp != f.timestamp) throw Error(ErrorCode::invalid_argument, "light timestamp differs from its frame");
  }
}

void check_record(const EventStream& s, const CameraFrameRecord& r) {
  if (r.camera_id != s.key.sensor_id) throw Error(ErrorCode::invalid_argument, "camera id differs from its stream");
  r.payload.validate();
}

void check_record(const EventStream& s, const LidarSweepRecord& r) {
  if (r.lidar_id != s.key.sensor_id) throw Error(ErrorCode::invalid_argument, "lidar id differs from its stream");
  if (r.timestamp_end < r.timestamp_start) throw Error(ErrorCode::invalid_argument, "lidar sweep ends before start");
  r.payload.validate();
}

// Rewrites a payload into its stored form for the chosen mode.
class PayloadPlacer {
 public:
  PayloadPlacer(const fs::path& dir, const WriteOptions& options) : dir_(dir), options_(options) {}

  PayloadRef place(const PayloadRef& in, const std::string& modality, std::size_t row) {
    if (options_.mode == StorageMode::self_contained) {
      if (in.location == PayloadLocation::inline_bytes) return in;
      PayloadRef out = in;
      out.location = PayloadLocation::inline_bytes;
      out.bytes = payload_bytes(in, options_.payload_base);
      out.relative_path.clear();
      out.validate();
      return out;
    }
    PayloadRef out = in;
    out.location = PayloadLocation::external;
    out.bytes.clear();
    // Container blobs shared by several rows are stored once.
    std::string source_key;
    if (in.frame_index) {
      source_key = modality + "\n" + (in.location == PayloadLocation::external ? in.relative_path : std::string{});
      const auto it = shared_.find(source_key);
      if (it != shared_.end() && in.location == PayloadLocation::external) {
        out.relative_path = it->second;
        return out;
      }
    }
    out.relative_path = "blobs/" + modality + "/" + std::to_string(row) + ".bin";
    const auto bytes = payload_bytes(in, options_.payload_base);
    if (bytes.empty()) throw Error(ErrorCode::invalid_argument, "empty payload at " + modality + " row " + std::to_string(row));
    write_bytes(dir_ / out.relative_path, bytes);
    if (!source_key.empty()) shared_[source_key] = out.relative_path;
    return out;
  }

 private:
  fs::path dir_;
  const WriteOptions& options_;
  std::map<std::string, std::string> shared_;
};

template <class Rec>
void write_rows(const fs::path& path, const ipc::Schema& schema, const EventStream& s, const std::vector<Rec>& rows,
                PayloadPlacer& placer) {
  ipc::IpcFileWriter writer(path, schema);
  const std::string modality = s.key.name();
  for (std::size_t start = 0; start < rows.size(); start += kRowGroupSize) {
    detail::BatchColumns cols(schema.fields);
    const std::size_t end = std::min(rows.size(), start + static_cast<std::size_t>(kRowGroupSize));
    for (std::size_t i = start; i < end; ++i) {
      if constexpr (std::is_same_v<Rec, CameraFrameRecord> || std::is_same_v<Rec, LidarSweepRecord>) {
        Rec stored = rows[i];
        stored.payload = placer.place(rows[i].payload, modality, i);
        detail::append_row(cols, stored);
      } else {
        detail::append_row(cols, rows[i]);
      }
    }
    writer.write_batch(cols.all());
  }
  writer.finish();
}

}  // namespace

void write_log(const fs::path& directory, std::span<const EventStream> streams, const LogMetadata& metadata,
               const WriteOptions& options) {
  metadata.validate();
  std::set<ModalityKey> seen;
  for (const auto& s : streams) {
    if (!seen.insert(s.key).second) throw Error(ErrorCode::duplicate_modality_file, s.key.file_name());
    if (!kind_matches(s.key.kind, s.rows)) {
      throw Error(ErrorCode::invalid_argument, "rows do not match modality " + s.key.name());
    }
    if (s.key.kind == ModalityKind::camera && !metadata.cameras.count(s.key.sensor_id)) {
      throw Error(ErrorCode::unknown_sensor_id, "camera '" + s.key.sensor_id + "' has no calibration");
    }
    if (s.key.kind == ModalityKind::lidar && !metadata.lidars.count(s.key.sensor_id)) {
      throw Error(ErrorCode::unknown_sensor_id, "lidar '" + s.key.sensor_id + "' has no extrinsic");
    }
    const auto ts = s.timestamps();
    for (std::size_t i = 1; i < ts.size(); ++i) {
      if (ts[i] <= ts[i - 1]) {
        throw Error(ErrorCode::unsorted_timestamps, s.key.name() + " row " + std::to_string(i) + " at " +
                                                        std::to_string(to_micros(ts[i])) + "us");
      }
    }
    std::visit([&](const auto& rows) {
      for (const auto& r : rows) check_record(s, r);
    }, s.rows);
  }

  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec || !fs::is_directory(directory)) {
    throw Error(ErrorCode::io_failure, "cannot create log directory " + directory.string());
  }
  DirectoryLock lock(directory);
  PayloadPlacer placer(directory, options);
  const std::string meta_json = metadata_to_json(metadata);
  try {
    for (const auto& s : streams) {
      ipc::Schema schema;
      schema.fields = detail::stream_fields(s.key.kind);
      schema.metadata = {{std::string(kMetaFormatVersion), "1"},
                         {std::string(kMetaMetadata), meta_json},
                         {std::string(kMetaModality), s.key.name()}};
      std::visit([&](const auto& rows) { write_rows(directory / s.key.file_name(), schema, s, rows, placer); }, s.rows);
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::io_failure, e.what());
  }
}

}  // namespace d123
