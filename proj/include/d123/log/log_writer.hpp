#pragma once

#include <filesystem>
#include <span>

#include "d123/log/metadata.hpp"
#include "d123/log/records.hpp"

namespace d123 {

enum class StorageMode { external, self_contained };

std::string_view to_string(StorageMode mode);
StorageMode storage_mode_from_string(std::string_view name);

/// Rows per record batch in every stream file.
inline constexpr std::int64_t kRowGroupSize = 1024;

struct WriteOptions {
  StorageMode mode = StorageMode::self_contained;
  // Resolves external PayloadRefs on the input streams.
  std::filesystem::path payload_base;
};

/// Writes one IPC file per stream into `directory`, creating it as needed.
/// External mode writes payloads to blobs/<modality>/<row>.bin; mp4 streams
/// keep one blob per distinct source file. Holds an exclusive lock file for
/// the duration.
/// Errors: UnsortedTimestamps, DuplicateModalityFile, MetadataMismatch
/// (unknown sensor id), IoFailure.
void write_log(const std::filesystem::path& directory, std::span<const EventStream> streams,
               const LogMetadata& metadata, const WriteOptions& options = {});

/// Schema key/value namespace.
inline constexpr std::string_view kMetaMetadata = "d123.metadata";
inline constexpr std::string_view kMetaModality = "d123.modality";
inline constexpr std::string_view kMetaFormatVersion = "d123.format_version";
inline constexpr std::string_view kLockFileName = ".d123.lock";

}  // namespace d123
