#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "d123/log/metadata.hpp"
#include "d123/log/records.hpp"
#include "d123/map/map_object.hpp"

namespace d123 {

/// One source log in canonical conventions, ready for the writers.
struct ParsedLog {
  LogMetadata metadata;
  std::vector<EventStream> streams;  // ordered by key
  std::optional<std::vector<MapObject>> map;
  // Directory external payload paths resolve against.
  std::filesystem::path payload_base;

  const EventStream* stream(const ModalityKey& key) const;
};

/// Enumerates source logs and emits them in canonical conventions.
class DatasetParser {
 public:
  virtual ~DatasetParser() = default;
  virtual std::string name() const = 0;
  virtual std::vector<std::string> log_names() const = 0;
  virtual ParsedLog parse(const std::string& log_name) const = 0;
};

/// JSON-lines reference source. `root` is either one source log (contains
/// metadata.json) or a directory of them.
class JsonlParser final : public DatasetParser {
 public:
  explicit JsonlParser(std::filesystem::path root);
  std::string name() const override { return "jsonl"; }
  std::vector<std::string> log_names() const override;
  ParsedLog parse(const std::string& log_name) const override;

 private:
  std::filesystem::path root_;
};

/// Reads one source log directory.
/// Errors: SchemaViolation (file:line), NonMonotonicTimestamps, UnknownFrameTag.
ParsedLog parse_jsonl_source(const std::filesystem::path& directory);

enum class BoxFrameTag { global, body, camera };

struct JsonlWriteOptions {
  BoxFrameTag box_frame = BoxFrameTag::global;
  std::string box_camera;  // camera id when box_frame == camera
};

/// Inverse of parse_jsonl_source: writes the source layout. Payloads are
/// inlined as base64 unless they reference files, which are copied along.
void write_jsonl_source(const ParsedLog& log, const std::filesystem::path& directory,
                        const JsonlWriteOptions& options = {});

/// Ego pose at `t`: exact record, or linear translation and spherical
/// rotation between the bracketing records. nullopt outside the stream.
std::optional<SE3> interpolate_ego_pose(const std::vector<EgoStateRecord>& ego, TimePoint t);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws InvalidArgument on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace d123
