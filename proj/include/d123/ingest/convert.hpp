#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "d123/ingest/source.hpp"
#include "d123/ingest/synthetic.hpp"
#include "d123/log/log_writer.hpp"

namespace d123 {

struct ConvertOptions {
  StorageMode mode = StorageMode::self_contained;
  // Densify the box stream to this period before writing.
  std::optional<Duration> interpolate_boxes;
  bool write_sync = true;
};

struct ConvertResult {
  std::filesystem::path directory;
  std::vector<std::pair<ModalityKey, std::size_t>> row_counts;
  std::size_t map_objects = 0;
  std::size_t map_issues = 0;  // unresolved map references
  std::string sync_name;
};

/// Writes the log, its map (map.arrow) and the keyframe sync table into
/// `out_dir`. Output is assembled in a sibling temporary directory and
/// renamed into place; reruns on the same input are byte-identical.
ConvertResult convert(const ParsedLog& log, const std::filesystem::path& out_dir, const ConvertOptions& options = {});

/// Reads a converted log (and its map, when referenced) back into parser
/// form; external payloads resolve against the log directory.
ParsedLog parsed_from_log(const std::filesystem::path& log_dir);

/// Reference stream for the keyframe table: boxes, else the first lidar,
/// else the ego stream, else the first stream.
ModalityKey keyframe_reference(const std::vector<ModalityKey>& keys);

/// Adds frames on the grid first + k * period between the original frames.
/// Positions are interpolated linearly, rotations spherically; a track only
/// appears between its first and last observation. Originals are kept.
std::vector<BoxFrame> interpolate_box_frames(const std::vector<BoxFrame>& frames, Duration period);

struct CorpusSplit {
  std::string split;
  std::string rig;  // preset name
  int logs = 1;
  double duration_s = 20.0;
  std::uint64_t seed = 0;
  EgoPath ego_path = EgoPath::line;
  MapTemplate map = MapTemplate::straight_road;
};

/// Generates and converts synthetic logs into <root>/<split>/<log_id>.
/// Returns the log directories in creation order.
std::vector<std::filesystem::path> build_synthetic_corpus(const std::filesystem::path& root,
                                                          const std::vector<CorpusSplit>& splits,
                                                          const ConvertOptions& options = {});

/// Copies a source into `destination`: a local directory, a file:// URL or
/// an http:// URL serving index.json (a list of relative file paths).
/// Errors: IoFailure.
void fetch_source(const std::string& uri, const std::filesystem::path& destination);

}  // namespace d123
