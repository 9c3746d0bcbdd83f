#include "d123/map/map_store.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "d123/error.hpp"

namespace d123 {

namespace {

constexpr std::int64_t kMapRowGroup = 1024;
constexpr std::string_view kMetaScope = "d123.map_scope";

std::vector<ipc::Field> map_fields() {
  using ipc::DataType;
  return {{"id", DataType::utf8(), false},          {"layer", DataType::utf8(), false},
          {"wkb", DataType::binary(), false},       {"attributes", DataType::utf8(), false},
          {"mesh", DataType::binary(), true},       {"min_x", DataType::float64(), false},
          {"min_y", DataType::float64(), false},    {"max_x", DataType::float64(), false},
          {"max_y", DataType::float64(), false}};
}

}  // namespace

std::string_view to_string(MapScope scope) { return scope == MapScope::per_log ? "per_log" : "dataset_wide"; }

MapStore::~MapStore() = default;

std::shared_ptr<MapStore> MapStore::from_objects(std::vector<MapObject> objects, MapScope scope,
                                                 std::size_t node_capacity) {
  std::sort(objects.begin(), objects.end(), [](const MapObject& a, const MapObject& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < objects.size(); ++i) {
    objects[i].validate();
    if (i > 0 && objects[i].id == objects[i - 1].id) {
      throw Error(ErrorCode::invalid_argument, "duplicate map object id " + objects[i].id);
    }
  }
  std::shared_ptr<MapStore> s(new MapStore());
  s->scope_ = scope;
  s->slots_ = std::make_unique<Slot[]>(objects.size());
  for (std::size_t i = 0; i < objects.size(); ++i) {
    s->ids_.push_back(objects[i].id);
    s->layers_.push_back(objects[i].layer);
    s->bboxes_.push_back(objects[i].geometry.bbox());
    s->slots_[i].object = std::make_unique<MapObject>(std::move(objects[i]));
  }
  s->decodes_ = s->ids_.size();
  s->build_index(node_capacity);
  return s;
}

std::shared_ptr<MapStore> MapStore::load(const std::filesystem::path& path, std::size_t node_capacity) {
  auto file = ipc::IpcFileReader::open(path);
  if (file->schema().fields != map_fields()) throw Error(ErrorCode::corrupt_file, path.string() + ": not a map file");
  std::shared_ptr<MapStore> s(new MapStore());
  s->file_ = file;
  s->scope_ = file->schema().metadata_value(kMetaScope) == "dataset_wide" ? MapScope::dataset_wide : MapScope::per_log;
  struct Row {
    std::string id;
    MapLayer layer;
    Rect bbox;
    std::uint32_t row;
  };
  std::vector<Row> rows;
  rows.reserve(static_cast<std::size_t>(file->num_rows()));
  std::uint32_t global = 0;
  for (std::size_t b = 0; b < file->num_batches(); ++b) {
    const auto id = file->column(b, "id");
    const auto layer = file->column(b, "layer");
    const auto x0 = file->column(b, "min_x"), y0 = file->column(b, "min_y");
    const auto x1 = file->column(b, "max_x"), y1 = file->column(b, "max_y");
    for (std::int64_t r = 0; r < id.length(); ++r, ++global) {
      Row row{std::string(id.string(r)), MapLayer::lane, {x0.f64(r), y0.f64(r), x1.f64(r), y1.f64(r)}, global};
      try {
        row.layer = map_layer_from_string(layer.string(r));
      } catch (const Error&) {
        throw Error(ErrorCode::corrupt_file, path.string() + ": unknown layer at row " + std::to_string(global));
      }
      if (row.bbox.empty() || !std::isfinite(row.bbox.min_x) || !std::isfinite(row.bbox.max_x) ||
          !std::isfinite(row.bbox.min_y) || !std::isfinite(row.bbox.max_y)) {
        throw Error(ErrorCode::corrupt_file, path.string() + ": bad bounding box at row " + std::to_string(global));
      }
      rows.push_back(std::move(row));
    }
  }
  if (!std::is_sorted(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; })) {
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].id == rows[i - 1].id) {
      throw Error(ErrorCode::corrupt_file, path.string() + ": duplicate id " + rows[i].id);
    }
    s->ids_.push_back(std::move(rows[i].id));
    s->layers_.push_back(rows[i].layer);
    s->bboxes_.push_back(rows[i].bbox);
    s->file_rows_.push_back(rows[i].row);
  }
  s->slots_ = std::make_unique<Slot[]>(s->ids_.size());
  s->build_index(node_capacity);
  return s;
}

void MapStore::build_index(std::size_t node_capacity) {
  layer_members_.assign(kNumMapLayers, {});
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    layer_members_[static_cast<std::size_t>(layers_[i])].push_back(static_cast<std::uint32_t>(i));
  }
  trees_.clear();
  for (std::size_t l = 0; l < kNumMapLayers; ++l) {
    std::vector<Rect> rects;
    rects.reserve(layer_members_[l].size());
    for (const auto i : layer_members_[l]) rects.push_back(bboxes_[i]);
    trees_.emplace_back(rects, node_capacity);
  }
}

const MapObject& MapStore::object_at(std::size_t index) const {
  if (index >= ids_.size()) throw Error(ErrorCode::invalid_argument, "map object index out of range");
  Slot& slot = slots_[index];
  if (!file_) return *slot.object;
  std::call_once(slot.once, [&] {
    const auto [b, r] = file_->locate(file_rows_[index]);
    auto obj = std::make_unique<MapObject>();
    obj->id = ids_[index];
    obj->layer = layers_[index];
    obj->geometry = wkb_decode(file_->column(b, "wkb").binary(r));
    obj->attributes = attributes_from_json(obj->layer, file_->column(b, "attributes").string(r));
    const auto mesh = file_->column(b, "mesh");
    if (!mesh.is_null(r)) obj->mesh = decode_mesh(mesh.binary(r));
    try {
      obj->validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::corrupt_file, file_->path().string() + ": " + e.what());
    }
    if (!(obj->geometry.bbox() == bboxes_[index])) {
      throw Error(ErrorCode::corrupt_file, file_->path().string() + ": stored bbox disagrees with geometry of " + obj->id);
    }
    slot.object = std::move(obj);
    ++decodes_;
  });
  return *slot.object;
}

std::optional<std::size_t> MapStore::index_of(std::string_view id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), id, [](const std::string& a, std::string_view b) { return a < b; });
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

const MapObject& MapStore::get(std::string_view id) const {
  const auto i = index_of(id);
  if (!i) throw Error(ErrorCode::unknown_id, std::string(id));
  return object_at(*i);
}

std::vector<MapObject> MapStore::all_objects() const {
  std::vector<MapObject> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(object_at(i));
  return out;
}

std::size_t MapStore::layer_size(MapLayer layer) const { return layer_members_[static_cast<std::size_t>(layer)].size(); }

void MapStore::write(const std::filesystem::path& path) const {
  ipc::Schema schema;
  schema.fields = map_fields();
  schema.metadata = {{"d123.format_version", "1"}, {"d123.modality", "map"}, {std::string(kMetaScope), std::string(to_string(scope_))}};
  ipc::IpcFileWriter writer(path, schema);
  for (std::size_t start = 0; start < size(); start += kMapRowGroup) {
    std::vector<ipc::ColumnBuilder> cols;
    for (const auto& f : schema.fields) cols.emplace_back(f);
    for (std::size_t i = start; i < std::min(size(), start + static_cast<std::size_t>(kMapRowGroup)); ++i) {
      const auto& o = object_at(i);
      cols[0].append_string(o.id);
      cols[1].append_string(to_string(o.layer));
      cols[2].append_binary(wkb_encode(o.geometry));
      cols[3].append_string(attributes_to_json(o.attributes));
      if (o.mesh) {
        cols[4].append_binary(encode_mesh(*o.mesh));
      } else {
        cols[4].append_null();
      }
      const Rect& r = bboxes_[i];
      cols[5].append_f64(r.min_x);
      cols[6].append_f64(r.min_y);
      cols[7].append_f64(r.max_x);
      cols[8].append_f64(r.max_y);
    }
    writer.write_batch(cols);
  }
  writer.finish();
}

std::vector<const MapObject*> MapStore::objects_in_radius(const Vec2& point, double radius,
                                                          std::span<const MapLayer> layers) const {
  if (!(radius >= 0.0)) throw Error(ErrorCode::invalid_argument, "radius must be non-negative");
  std::set<MapLayer> unique(layers.begin(), layers.end());
  std::vector<std::uint32_t> hits;
  std::vector<std::uint32_t> candidates;
  for (const auto layer : unique) {
    candidates.clear();
    const auto l = static_cast<std::size_t>(layer);
    trees_[l].query(Rect::around(point, radius), candidates);
    for (const auto c : candidates) {
      const auto idx = layer_members_[l][c];
      if (bboxes_[idx].distance(point) > radius) continue;
      if (distance_xy(object_at(idx).geometry, point) <= radius) hits.push_back(idx);
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<const MapObject*> out;
  for (const auto i : hits) out.push_back(&object_at(i));
  return out;
}

std::vector<const MapObject*> MapStore::objects_in_radius(const Vec3& point, double radius,
                                                          const std::vector<std::string>& layers) const {
  std::vector<MapLayer> ls;
  for (const auto& n : layers) ls.push_back(map_layer_from_string(n));
  return objects_in_radius(Vec2(point.head<2>()), radius, ls);
}

std::vector<std::size_t> MapStore::objects_in_rect(const Rect& rect, std::span<const MapLayer> layers) const {
  std::set<MapLayer> unique(layers.begin(), layers.end());
  std::vector<std::size_t> out;
  std::vector<std::uint32_t> candidates;
  for (const auto layer : unique) {
    candidates.clear();
    const auto l = static_cast<std::size_t>(layer);
    trees_[l].query(rect, candidates);
    for (const auto c : candidates) out.push_back(layer_members_[l][c]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<const MapObject*> MapStore::objects_intersecting(const Rect& rect, std::span<const MapLayer> layers) const {
  std::vector<const MapObject*> out;
  for (const auto i : objects_in_rect(rect, layers)) {
    const auto& o = object_at(i);
    if (intersects(o.geometry, rect)) out.push_back(&o);
  }
  return out;
}

std::pair<const MapObject*, double> MapStore::nearest(const Vec2& point, MapLayer layer) const {
  const auto l = static_cast<std::size_t>(layer);
  const auto& members = layer_members_[l];
  if (members.empty()) throw Error(ErrorCode::layer_empty, std::string(to_string(layer)));
  const Rect root = trees_[l].root_rect();
  const double spacing = std::sqrt(std::max((root.max_x - root.min_x) * (root.max_y - root.min_y), 1.0) /
                                   static_cast<double>(members.size()));
  double r = root.distance(point) + std::max(spacing, 1e-3);
  std::vector<std::uint32_t> candidates;
  for (;;) {
    candidates.clear();
    trees_[l].query(Rect::around(point, r), candidates);
    std::optional<std::uint32_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto c : candidates) {
      const auto idx = members[c];
      if (bboxes_[idx].distance(point) > std::min(r, best_d)) continue;
      const double d = distance_xy(object_at(idx).geometry, point);
      if (d < best_d || (d == best_d && idx < *best)) {
        best = idx;
        best_d = d;
      }
    }
    if (best && best_d <= r) return {&object_at(*best), best_d};
    // Every object closer than the current best lies within best_d.
    r = best ? best_d : 2.0 * r;
  }
}

const MapObject* MapStore::resolve(const std::string& id) const {
  const auto i = index_of(id);
  return i ? &object_at(*i) : nullptr;
}

std::vector<const MapObject*> MapStore::resolve_lanes(std::string_view lane_id, const std::vector<std::string>& ids) const {
  std::vector<const MapObject*> out;
  for (const auto& id : ids) {
    const auto* o = resolve(id);
    if (!o) throw Error(ErrorCode::dangling_reference, std::string(lane_id) + " -> " + id);
    out.push_back(o);
  }
  return out;
}

std::vector<const MapObject*> MapStore::lane_successors(std::string_view lane_id) const {
  return resolve_lanes(lane_id, get(lane_id).lane().successors);
}

std::vector<const MapObject*> MapStore::lane_predecessors(std::string_view lane_id) const {
  return resolve_lanes(lane_id, get(lane_id).lane().predecessors);
}

std::pair<const MapObject*, const MapObject*> MapStore::lane_neighbors(std::string_view lane_id) const {
  const auto& lane = get(lane_id).lane();
  auto one = [&](const std::optional<std::string>& id) -> const MapObject* {
    if (!id) return nullptr;
    const auto* o = resolve(*id);
    if (!o) throw Error(ErrorCode::dangling_reference, std::string(lane_id) + " -> " + *id);
    return o;
  };
  return {one(lane.left_neighbor), one(lane.right_neighbor)};
}

std::vector<ReferenceIssue> MapStore::validate() const {
  std::vector<ReferenceIssue> issues;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& o = object_at(i);
    for (const auto& [field, ref] : o.references()) {
      if (!index_of(ref)) issues.push_back({o.id, field, ref});
    }
  }
  return issues;
}

}  // namespace d123
