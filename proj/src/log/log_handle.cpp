#include "d123/log/log_handle.hpp"

#include <algorithm>

#include "d123/error.hpp"
#include "d123/log/log_writer.hpp"
#include "stream_schema.hpp"

namespace d123 {

namespace fs = std::filesystem;

namespace {

std::atomic<std::int64_t> g_live_handles{0};
std::atomic<std::uint64_t> g_rows_read{0};

}  // namespace

std::int64_t LogHandle::live_handles() { return g_live_handles.load(); }
std::uint64_t LogHandle::global_rows_read() { return g_rows_read.load(); }

LogHandle::~LogHandle() { --g_live_handles; }

std::shared_ptr<LogHandle> LogHandle::open(const fs::path& directory) {
  if (!fs::is_directory(directory)) throw Error(ErrorCode::io_failure, "not a log directory: " + directory.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(directory)) {
    if (entry.is_regular_file() && entry.path().extension() == ".arrow") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::shared_ptr<LogHandle> h(new LogHandle());
  ++g_live_handles;
  h->directory_ = directory;
  h->metadata_.log_id = directory.filename().string();

  std::optional<std::string> meta_text;
  fs::path meta_source;
  for (const auto& path : files) {
    const std::string stem = path.stem().string();
    const bool is_sync = stem.starts_with("sync_") && stem.size() > 5;
    const auto key = is_sync ? std::nullopt : ModalityKey::parse(stem);
    if (!is_sync && !key) continue;  // map.arrow and foreign files

    auto reader = ipc::IpcFileReader::open(path);
    const auto text = reader->schema().metadata_value(kMetaMetadata);
    if (!text) throw Error(ErrorCode::corrupt_file, path.string() + ": missing " + std::string(kMetaMetadata));
    if (!meta_text) {
      h->metadata_ = metadata_from_json(*text);
      meta_text = *text;
      meta_source = path;
    } else if (*text != *meta_text && metadata_from_json(*text) != h->metadata_) {
      throw Error(ErrorCode::metadata_mismatch,
                  path.filename().string() + " disagrees with " + meta_source.filename().string());
    }

    if (is_sync) {
      h->sync_files_[stem.substr(5)] = std::move(reader);
      continue;
    }
    if (reader->schema().metadata_value(kMetaModality) != key->name()) {
      throw Error(ErrorCode::corrupt_file, path.string() + ": modality tag does not match the file name");
    }
    if (reader->schema().fields != detail::stream_fields(key->kind)) {
      throw Error(ErrorCode::corrupt_file, path.string() + ": unexpected column layout");
    }
    auto s = std::make_unique<Stream>();
    s->file = std::move(reader);
    h->streams_.emplace(*key, std::move(s));
  }
  return h;
}

std::vector<ModalityKey> LogHandle::modalities() const {
  std::vector<ModalityKey> out;
  for (const auto& [k, s] : streams_) out.push_back(k);
  return out;
}

const LogHandle::Stream& LogHandle::stream(const ModalityKey& key) const {
  const auto it = streams_.find(key);
  if (it == streams_.end()) throw Error(ErrorCode::missing_modality, key.name() + " in " + directory_.string());
  return *it->second;
}

std::int64_t LogHandle::row_count(const ModalityKey& key) const { return stream(key).file->num_rows(); }

const std::vector<TimePoint>& LogHandle::timestamps(const ModalityKey& key) const {
  const Stream& s = stream(key);
  std::call_once(s.ts_once, [&] {
    std::vector<TimePoint> ts;
    ts.reserve(static_cast<std::size_t>(s.file->num_rows()));
    for (std::size_t b = 0; b < s.file->num_batches(); ++b) {
      const auto col = s.file->column(b, "timestamp_us");
      for (std::int64_t r = 0; r < col.length(); ++r) {
        const TimePoint t = from_micros(col.i64(r));
        if (!ts.empty() && t <= ts.back()) {
          throw Error(ErrorCode::unsorted_timestamps,
                      s.file->path().string() + " row " + std::to_string(ts.size()));
        }
        ts.push_back(t);
      }
    }
    s.ts = std::move(ts);
  });
  return s.ts;
}

void LogHandle::count_row() const {
  ++rows_read_;
  ++g_rows_read;
}

namespace {

std::pair<std::size_t, std::int64_t> locate_row(const ipc::IpcFileReader& f, std::int64_t row, const std::string& name) {
  if (row < 0 || row >= f.num_rows()) {
    throw Error(ErrorCode::invalid_argument,
                name + " row " + std::to_string(row) + " out of range [0, " + std::to_string(f.num_rows()) + ")");
  }
  return f.locate(row);
}

}  // namespace

EgoStateRecord LogHandle::ego_state(std::int64_t row) const {
  const auto& f = *stream(ModalityKey::ego_state()).file;
  const auto [b, r] = locate_row(f, row, "ego_state");
  count_row();
  return detail::read_ego(f, b, r);
}

BoxFrame LogHandle::boxes(std::int64_t row) const {
  const auto& f = *stream(ModalityKey::boxes()).file;
  const auto [b, r] = locate_row(f, row, "boxes");
  count_row();
  return detail::read_boxes(f, b, r);
}

TrafficLightFrame LogHandle::traffic_lights(std::int64_t row) const {
  const auto& f = *stream(ModalityKey::traffic_lights()).file;
  const auto [b, r] = locate_row(f, row, "traffic_lights");
  count_row();
  return detail::read_traffic_lights(f, b, r);
}

CameraFrameRecord LogHandle::camera(const std::string& camera_id, std::int64_t row) const {
  const auto& f = *stream(ModalityKey::camera(camera_id)).file;
  const auto [b, r] = locate_row(f, row, "camera_" + camera_id);
  count_row();
  return detail::read_camera(f, b, r, camera_id);
}

LidarSweepRecord LogHandle::lidar(const std::string& lidar_id, std::int64_t row) const {
  const auto& f = *stream(ModalityKey::lidar(lidar_id)).file;
  const auto [b, r] = locate_row(f, row, "lidar_" + lidar_id);
  count_row();
  return detail::read_lidar(f, b, r, lidar_id);
}

EventStream LogHandle::read_stream(const ModalityKey& key) const {
  const std::int64_t n = row_count(key);
  auto collect = [&](auto&& get) {
    std::vector<std::decay_t<decltype(get(0))>> rows;
    rows.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) rows.push_back(get(i));
    return rows;
  };
  EventStream out{key, {}};
  switch (key.kind) {
    case ModalityKind::ego_state: out.rows = collect([&](std::int64_t i) { return ego_state(i); }); break;
    case ModalityKind::boxes: out.rows = collect([&](std::int64_t i) { return boxes(i); }); break;
    case ModalityKind::traffic_lights: out.rows = collect([&](std::int64_t i) { return traffic_lights(i); }); break;
    case ModalityKind::camera: out.rows = collect([&](std::int64_t i) { return camera(key.sensor_id, i); }); break;
    case ModalityKind::lidar: out.rows = collect([&](std::int64_t i) { return lidar(key.sensor_id, i); }); break;
  }
  (void)timestamps(key);
  return out;
}

std::vector<std::string> LogHandle::sync_names() const {
  std::vector<std::string> out;
  for (const auto& [name, f] : sync_files_) out.push_back(name);
  return out;
}

std::shared_ptr<const ipc::IpcFileReader> LogHandle::sync_file(const std::string& name) const {
  const auto it = sync_files_.find(name);
  return it == sync_files_.end() ? nullptr : it->second;
}

std::shared_ptr<const ipc::IpcFileReader> LogHandle::stream_file(const ModalityKey& key) const {
  return stream(key).file;
}

}  // namespace d123
