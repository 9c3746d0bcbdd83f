#pragma once

// Apache Arrow IPC *file* format (magic, schema message, record batches,
// footer) for the column types in column.hpp. Files written here are
// readable by any conforming Arrow implementation and vice versa for that
// type subset.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <span>
#include <vector>

#include "d123/ipc/column.hpp"
#include "d123/ipc/mapped_file.hpp"

namespace d123::ipc {

/// Access instrumentation. `body_bytes` counts the bytes of column buffers
/// handed out by IpcFileReader::column, which bounds what gets faulted in.
struct IoCounters {
  std::atomic<std::uint64_t> files_opened{0};
  std::atomic<std::uint64_t> metadata_bytes{0};
  std::atomic<std::uint64_t> column_reads{0};
  std::atomic<std::uint64_t> body_bytes{0};

  void reset();
};

IoCounters& global_io_counters();

class IpcFileWriter {
 public:
  IpcFileWriter(const std::filesystem::path& path, Schema schema);
  ~IpcFileWriter();
  IpcFileWriter(const IpcFileWriter&) = delete;
  IpcFileWriter& operator=(const IpcFileWriter&) = delete;

  /// One record batch; every builder must match the schema field at the
  /// same position and have the same length.
  void write_batch(std::span<const ColumnBuilder> columns);

  /// Writes the footer. Must be called exactly once; the destructor only
  /// closes the stream.
  void finish();

 private:
  struct Block {
    std::int64_t offset;
    std::int32_t metadata_length;
    std::int64_t body_length;
  };

  void write_message(const std::vector<std::uint8_t>& metadata, const std::vector<std::uint8_t>& body);

  std::filesystem::path path_;
  Schema schema_;
  std::ofstream out_;
  std::int64_t position_ = 0;
  std::vector<Block> blocks_;
  bool finished_ = false;
};

class IpcFileReader {
 public:
  /// Maps the file and parses the footer, schema and record-batch headers.
  /// No column data is touched. Throws CorruptFile naming the file.
  static std::shared_ptr<const IpcFileReader> open(const std::filesystem::path& path);

  const std::filesystem::path& path() const { return path_; }
  const Schema& schema() const { return schema_; }
  std::size_t num_batches() const { return batches_.size(); }
  std::int64_t num_rows() const { return total_rows_; }
  std::int64_t batch_length(std::size_t batch) const { return batches_.at(batch).length; }

  /// (batch index, row within batch) for a global row index.
  std::pair<std::size_t, std::int64_t> locate(std::int64_t row) const;

  ArrayView column(std::size_t batch, std::size_t column) const;
  ArrayView column(std::size_t batch, std::string_view name) const;

  const IoCounters& counters() const { return counters_; }
  std::span<const std::uint8_t> mapped_bytes() const { return file_.bytes(); }

  IpcFileReader(const IpcFileReader&) = delete;
  IpcFileReader& operator=(const IpcFileReader&) = delete;

 private:
  struct BufferRef {
    std::int64_t offset;
    std::int64_t length;
  };
  struct NodeRef {
    std::int64_t length;
    std::int64_t null_count;
  };
  struct Batch {
    std::int64_t length = 0;
    std::int64_t first_row = 0;
    std::size_t body_offset = 0;
    std::size_t body_length = 0;
    std::vector<NodeRef> nodes;
    std::vector<BufferRef> buffers;
  };

  IpcFileReader() = default;
  std::unique_ptr<ArrayView> build_view(const Batch& batch, const Field& field, std::size_t& node,
                                        std::size_t& buffer, std::uint64_t& bytes) const;

  std::filesystem::path path_;
  MappedFile file_;
  Schema schema_;
  std::vector<Batch> batches_;
  std::vector<std::pair<std::size_t, std::size_t>> column_start_;  // (node, buffer) per field
  std::int64_t total_rows_ = 0;
  mutable IoCounters counters_;
};

}  // namespace d123::ipc
