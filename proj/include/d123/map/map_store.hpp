#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "d123/ipc/ipc_file.hpp"
#include "d123/map/map_object.hpp"
#include "d123/map/str_tree.hpp"

namespace d123 {

enum class MapScope { per_log, dataset_wide };

struct ReferenceIssue {
  std::string object_id;
  std::string field;
  std::string missing_id;

  bool operator==(const ReferenceIssue&) const = default;
};

/// Immutable map with one STR tree per layer. Stores loaded from a file
/// decode geometry and attributes per object on first touch.
class MapStore {
 public:
  static constexpr std::size_t kDefaultNodeCapacity = 10;

  /// Validates every object; duplicate ids raise InvalidArgument.
  static std::shared_ptr<MapStore> from_objects(std::vector<MapObject> objects, MapScope scope = MapScope::per_log,
                                                std::size_t node_capacity = kDefaultNodeCapacity);
  /// Reads ids, layers and bounding boxes in bulk and builds the index.
  /// Errors: CorruptFile, MalformedWkb (on first decode).
  static std::shared_ptr<MapStore> load(const std::filesystem::path& path,
                                        std::size_t node_capacity = kDefaultNodeCapacity);

  ~MapStore();
  MapStore(const MapStore&) = delete;
  MapStore& operator=(const MapStore&) = delete;

  void write(const std::filesystem::path& path) const;

  MapScope scope() const { return scope_; }
  std::size_t size() const { return ids_.size(); }
  /// Objects are ordered by id.
  const std::string& id_at(std::size_t index) const { return ids_[index]; }
  MapLayer layer_at(std::size_t index) const { return layers_[index]; }
  const Rect& bbox_at(std::size_t index) const { return bboxes_[index]; }
  const MapObject& object_at(std::size_t index) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  /// Throws UnknownId.
  const MapObject& get(std::string_view id) const;
  std::vector<MapObject> all_objects() const;
  std::size_t layer_size(MapLayer layer) const;

  /// Objects of `layers` within xy distance `radius` of `point`, by id.
  std::vector<const MapObject*> objects_in_radius(const Vec2& point, double radius,
                                                  std::span<const MapLayer> layers) const;
  /// Same, with layer names (UnknownLayer on a bad name).
  std::vector<const MapObject*> objects_in_radius(const Vec3& point, double radius,
                                                  const std::vector<std::string>& layers) const;
  /// Objects whose bounding rectangle meets `rect`, by id. No decoding.
  std::vector<std::size_t> objects_in_rect(const Rect& rect, std::span<const MapLayer> layers) const;
  /// Objects whose geometry meets `rect`, by id.
  std::vector<const MapObject*> objects_intersecting(const Rect& rect, std::span<const MapLayer> layers) const;
  /// Closest object of a layer and its distance; ties to the smaller id.
  /// Throws LayerEmpty.
  std::pair<const MapObject*, double> nearest(const Vec2& point, MapLayer layer) const;

  /// Errors: UnknownId, DanglingReference, InvalidArgument (not a lane).
  std::vector<const MapObject*> lane_successors(std::string_view lane_id) const;
  std::vector<const MapObject*> lane_predecessors(std::string_view lane_id) const;
  std::pair<const MapObject*, const MapObject*> lane_neighbors(std::string_view lane_id) const;

  /// Every unresolved cross-reference. Decodes all objects.
  std::vector<ReferenceIssue> validate() const;

  const StrTree& index(MapLayer layer) const { return trees_[static_cast<std::size_t>(layer)]; }
  /// Objects decoded so far (always size() for in-memory stores).
  std::uint64_t decode_count() const { return decodes_.load(); }

 private:
  struct Slot {
    std::once_flag once;
    std::unique_ptr<MapObject> object;
  };

  MapStore() = default;
  void build_index(std::size_t node_capacity);
  const MapObject* resolve(const std::string& id) const;
  std::vector<const MapObject*> resolve_lanes(std::string_view lane_id, const std::vector<std::string>& ids) const;

  MapScope scope_ = MapScope::per_log;
  std::vector<std::string> ids_;
  std::vector<MapLayer> layers_;
  std::vector<Rect> bboxes_;
  std::vector<std::uint32_t> file_rows_;
  std::vector<std::vector<std::uint32_t>> layer_members_;  // per layer: store indices
  std::vector<StrTree> trees_;
  std::unique_ptr<Slot[]> slots_;
  std::shared_ptr<const ipc::IpcFileReader> file_;
  mutable std::atomic<std::uint64_t> decodes_{0};
};

inline std::shared_ptr<MapStore> load_map(const std::filesystem::path& path) { return MapStore::load(path); }
inline void write_map(const MapStore& store, const std::filesystem::path& path) { store.write(path); }

std::string_view to_string(MapScope scope);

/// Attribute record as JSON text (used in the map file and GeoJSON).
std::string attributes_to_json(const MapAttributes& attributes);
MapAttributes attributes_from_json(MapLayer layer, std::string_view text);

/// One FeatureCollection per non-empty layer, written as <dir>/<layer>.geojson.
void export_geojson(const MapStore& store, const std::filesystem::path& directory);
/// Reads a GeoJSON FeatureCollection file, or every *.geojson in a directory.
/// Features carry properties {id, layer, attributes}.
std::vector<MapObject> import_geojson(const std::filesystem::path& path);

}  // namespace d123
