#pragma once

// Column layouts of the per-modality stream files.

#include <span>
#include <string>
#include <vector>

#include "d123/ipc/ipc_file.hpp"
#include "d123/log/records.hpp"

namespace d123::detail {

inline constexpr const char* kPoseColumns[7] = {"tx", "ty", "tz", "qw", "qx", "qy", "qz"};

std::vector<ipc::Field> stream_fields(ModalityKind kind);

/// Builders for one batch, addressable by column name.
class BatchColumns {
 public:
  explicit BatchColumns(const std::vector<ipc::Field>& fields);
  ipc::ColumnBuilder& operator[](std::string_view name);
  std::span<const ipc::ColumnBuilder> all() const { return cols_; }

 private:
  std::vector<std::string> names_;
  std::vector<ipc::ColumnBuilder> cols_;
};

void append_row(BatchColumns& cols, const EgoStateRecord& r);
void append_row(BatchColumns& cols, const BoxFrame& r);
void append_row(BatchColumns& cols, const TrafficLightFrame& r);
// Payload already resolved to its stored form.
void append_row(BatchColumns& cols, const CameraFrameRecord& r);
void append_row(BatchColumns& cols, const LidarSweepRecord& r);

EgoStateRecord read_ego(const ipc::IpcFileReader& f, std::size_t batch, std::int64_t row);
BoxFrame read_boxes(const ipc::IpcFileReader& f, std::size_t batch, std::int64_t row);
TrafficLightFrame read_traffic_lights(const ipc::IpcFileReader& f, std::size_t batch, std::int64_t row);
CameraFrameRecord read_camera(const ipc::IpcFileReader& f, std::size_t batch, std::int64_t row, const std::string& id);
LidarSweepRecord read_lidar(const ipc::IpcFileReader& f, std::size_t batch, std::int64_t row, const std::string& id);

}  // namespace d123::detail
