#include <doctest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "d123/error.hpp"
#include "d123/map/generators.hpp"
#include "d123/map/map_store.hpp"

using namespace d123;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_path(const std::string& name) {
  auto p = fs::temp_directory_path() / ("d123_test_map_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<std::uint8_t> from_hex(const std::string& hex) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::invalid_argument;
}

Geometry random_geometry(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> c(-1e4, 1e4);
  const bool z = rng() % 2;
  auto pt = [&] { return Vec3(c(rng), c(rng), z ? c(rng) : 0.0); };
  switch (rng() % 3) {
    case 0: return Geometry::point(pt(), z);
    case 1: {
      std::vector<Vec3> pts;
      for (std::size_t i = 0, n = 2 + rng() % 8; i < n; ++i) pts.push_back(pt());
      return Geometry::linestring(pts, z);
    }
    default: {
      std::vector<std::vector<Vec3>> rings;
      for (std::size_t r = 0, nr = 1 + rng() % 3; r < nr; ++r) {
        std::vector<Vec3> ring;
        for (std::size_t i = 0, n = 3 + rng() % 6; i < n; ++i) ring.push_back(pt());
        ring.push_back(ring.front());
        rings.push_back(ring);
      }
      return Geometry::polygon(rings, z);
    }
  }
}

std::vector<std::string> ids(const std::vector<const MapObject*>& objs) {
  std::vector<std::string> out;
  for (auto* o : objs) out.push_back(o->id);
  return out;
}

}  // namespace

TEST_CASE("wkb point z layout") {
  const auto bytes = wkb_encode(Geometry::point(Vec3::Zero(), true));
  REQUIRE(bytes.size() == 29);
  CHECK(bytes[0] == 1);
  CHECK(bytes[1] == 0xE9);  // 1001 little-endian
  CHECK(bytes[2] == 0x03);
  CHECK(std::all_of(bytes.begin() + 5, bytes.end(), [](auto b) { return b == 0; }));
  CHECK(wkb_encode(Geometry::point(Vec3::Zero(), false)).size() == 21);
}

TEST_CASE("wkb round trip on random geometries") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto g = random_geometry(rng);
    const auto bytes = wkb_encode(g);
    REQUIRE(wkb_decode(bytes) == g);
  }
}

TEST_CASE("wkb malformed buffers") {
  std::mt19937_64 rng(3);
  const auto g = Geometry::linestring({{0, 0, 1}, {1, 2, 3}, {4, 5, 6}}, true);
  const auto bytes = wkb_encode(g);
  for (std::size_t cut = 0; cut < bytes.size(); ++cut) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + cut);
    CHECK(code_of([&] { wkb_decode(part); }) == ErrorCode::malformed_wkb);
  }
  auto bad_type = wkb_encode(Geometry::point({1, 2, 0}, false));
  bad_type[1] = 7;  // GeometryCollection is not supported
  CHECK(code_of([&] { wkb_decode(bad_type); }) == ErrorCode::malformed_wkb);
  auto open_ring = wkb_encode(Geometry::polygon({{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 0, 0}}}, false));
  open_ring[open_ring.size() - 16] = 0x40;  // perturb the closing vertex
  CHECK(code_of([&] { wkb_decode(open_ring); }) == ErrorCode::malformed_wkb);
  auto trailing = wkb_encode(g);
  trailing.push_back(0);
  CHECK(code_of([&] { wkb_decode(trailing); }) == ErrorCode::malformed_wkb);
}

TEST_CASE("wkb vectors match the shapely fixture") {
  std::ifstream in(fs::path(D123_FIXTURE_DIR) / "wkb_vectors.json");
  REQUIRE(in);
  const json doc = json::parse(in);
  REQUIRE(doc["cases"].size() == 60);
  int queries = 0;
  for (const auto& c : doc["cases"]) {
    const bool z = c["has_z"];
    std::vector<std::vector<Vec3>> rings;
    for (const auto& r : c["rings"]) {
      std::vector<Vec3> ring;
      for (const auto& p : r) ring.emplace_back(p[0], p[1], z ? p[2].get<double>() : 0.0);
      rings.push_back(ring);
    }
    Geometry g;
    const std::string kind = c["kind"];
    if (kind == "point") g = Geometry::point(rings[0][0], z);
    else if (kind == "linestring") g = Geometry::linestring(rings[0], z);
    else g = Geometry::polygon(rings, z);
    const auto le = from_hex(c["wkb_le"]);
    CHECK(wkb_encode(g) == le);
    CHECK(wkb_decode(le) == g);
    CHECK(wkb_decode(from_hex(c["wkb_be"])) == g);
    for (const auto& q : c["queries"]) {
      const Vec2 p(q["point"][0], q["point"][1]);
      CHECK(distance_xy(g, p) == doctest::Approx(q["distance"].get<double>()).epsilon(1e-12));
      const Rect r{q["rect"][0], q["rect"][1], q["rect"][2], q["rect"][3]};
      CHECK(intersects(g, r) == q["intersects"].get<bool>());
      ++queries;
    }
  }
  CHECK(queries == 300);
}

TEST_CASE("str tree structure and range queries") {
  SUBCASE("empty") {
    StrTree t({}, 10);
    CHECK(t.height() == 0);
    std::vector<std::uint32_t> out;
    t.query({-1e9, -1e9, 1e9, 1e9}, out);
    CHECK(out.empty());
    CHECK(t.check_invariants().empty());
  }
  SUBCASE("single") {
    const Rect r{1, 2, 3, 4};
    StrTree t({r}, 10);
    CHECK(t.height() == 1);
    CHECK(t.root_rect() == r);
  }
  SUBCASE("random rectangles against brute force") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> pos(0, 1000), ext(0, 15);
    for (std::size_t n : {2u, 9u, 10u, 11u, 101u, 1000u, 10000u}) {
      for (std::size_t cap : {2u, 4u, 10u, 16u}) {
        std::vector<Rect> rects;
        for (std::size_t i = 0; i < n; ++i) {
          const double x = pos(rng), y = pos(rng);
          rects.push_back({x, y, x + ext(rng), y + ext(rng)});
        }
        StrTree t(rects, cap);
        CAPTURE(n);
        CAPTURE(cap);
        REQUIRE(t.check_invariants() == "");
        const double expect_h = std::max(1.0, std::ceil(std::log(double(n)) / std::log(double(cap)) - 1e-12));
        CHECK(t.height() == static_cast<std::size_t>(expect_h));
        for (int q = 0; q < (n == 10000 ? 1000 : 50); ++q) {
          const double x = pos(rng), y = pos(rng), w = ext(rng) * 5;
          const Rect qr{x, y, x + w, y + w};
          std::vector<std::uint32_t> got;
          t.query(qr, got);
          std::sort(got.begin(), got.end());
          std::vector<std::uint32_t> want;
          for (std::uint32_t i = 0; i < n; ++i)
            if (rects[i].intersects(qr)) want.push_back(i);
          REQUIRE(got == want);
        }
      }
    }
  }
  SUBCASE("deterministic") {
    std::vector<Rect> rects(50, Rect{0, 0, 1, 1});
    StrTree a(rects, 4), b(rects, 4);
    CHECK(a.entry_order() == b.entry_order());
  }
}

TEST_CASE("map queries equal brute force") {
  for (std::size_t n : {100u, 1000u}) {
    const auto objs = random_map_objects(n, 40 + n, 1000.0);
    const auto store = MapStore::from_objects(objs);
    REQUIRE(store->size() == n);
    std::mt19937_64 rng(n);
    std::uniform_real_distribution<double> pos(-50, 1050), rad(0, 80);
    const auto layers = all_map_layers();
    for (int q = 0; q < 300; ++q) {
      const Vec2 p(pos(rng), pos(rng));
      const double r = rad(rng);
      std::vector<MapLayer> want_layers;
      for (auto l : layers)
        if (rng() % 3 == 0) want_layers.push_back(l);
      std::vector<std::string> want;
      for (const auto& o : objs)
        if (std::find(want_layers.begin(), want_layers.end(), o.layer) != want_layers.end() && distance_xy(o.geometry, p) <= r)
          want.push_back(o.id);
      std::sort(want.begin(), want.end());
      REQUIRE(ids(store->objects_in_radius(p, r, want_layers)) == want);

      const Rect rect = Rect::around(p, r);
      std::vector<std::string> want_rect, want_inter;
      for (const auto& o : objs) {
        if (std::find(want_layers.begin(), want_layers.end(), o.layer) == want_layers.end()) continue;
        if (o.geometry.bbox().intersects(rect)) want_rect.push_back(o.id);
        if (intersects(o.geometry, rect)) want_inter.push_back(o.id);
      }
      std::sort(want_rect.begin(), want_rect.end());
      std::sort(want_inter.begin(), want_inter.end());
      std::vector<std::string> got_rect;
      for (auto i : store->objects_in_rect(rect, want_layers)) got_rect.push_back(store->id_at(i));
      REQUIRE(got_rect == want_rect);
      REQUIRE(ids(store->objects_intersecting(rect, want_layers)) == want_inter);

      const MapLayer layer = layers[rng() % layers.size()];
      const MapObject* best = nullptr;
      double best_d = 0;
      for (const auto& o : objs) {
        if (o.layer != layer) continue;
        const double d = distance_xy(o.geometry, p);
        if (!best || d < best_d || (d == best_d && o.id < best->id)) best = &o, best_d = d;
      }
      if (!best) {
        CHECK(code_of([&] { store->nearest(p, layer); }) == ErrorCode::layer_empty);
      } else {
        const auto [got, d] = store->nearest(p, layer);
        REQUIRE(got->id == best->id);
        REQUIRE(d == best_d);
      }
    }
  }
}

TEST_CASE("radius query edge cases") {
  const auto store = MapStore::from_objects(straight_road_map({}));
  const std::array lane{MapLayer::lane};
  const auto inside = store->objects_in_radius(Vec2(75.0, 1.0), 0.0, lane);
  REQUIRE(inside.size() == 1);
  CHECK(inside[0]->id == "lane_s1_l0");
  CHECK(store->objects_in_radius(Vec2(75.0, 1.0), 100.0, std::span<const MapLayer>{}).empty());
  CHECK(code_of([&] { store->objects_in_radius(Vec3(0, 0, 0), 1.0, {"lanes"}); }) == ErrorCode::unknown_layer);
  CHECK(store->objects_in_radius(Vec3(75.0, 1.0, 0.0), 50.0, {"lane", "crosswalk"}).size() == 6);

  const auto [on_line, d] = store->nearest(Vec2(60.0, 1.75), MapLayer::lane);
  CHECK(on_line->id == "lane_s1_l0");
  CHECK(d == 0.0);

  // Two lanes equidistant: the smaller id wins.
  LaneAttributes la;
  la.centerline = Geometry::linestring({{0, 0, 0}, {1, 0, 0}}, false);
  auto square = [](double x) { return Geometry::polygon({{{x, 0, 0}, {x + 1, 0, 0}, {x + 1, 1, 0}, {x, 1, 0}, {x, 0, 0}}}, false); };
  const auto pair = MapStore::from_objects({{"b", MapLayer::lane, square(0), la, {}}, {"a", MapLayer::lane, square(4), la, {}}});
  CHECK(pair->nearest(Vec2(2.5, 0.5), MapLayer::lane).first->id == "a");
  CHECK(code_of([&] { pair->nearest(Vec2(0, 0), MapLayer::crosswalk); }) == ErrorCode::layer_empty);
}

TEST_CASE("lane graph") {
  const auto store = MapStore::from_objects(straight_road_map({}));
  CHECK(store->validate().empty());
  const auto succ = store->lane_successors("lane_s1_l1");
  const auto pred = store->lane_predecessors("lane_s1_l1");
  const auto [left, right] = store->lane_neighbors("lane_s1_l1");
  REQUIRE(succ.size() == 1);
  REQUIRE(pred.size() == 1);
  CHECK(succ[0]->id == "lane_s2_l1");
  CHECK(pred[0]->id == "lane_s0_l1");
  CHECK(left == nullptr);
  REQUIRE(right != nullptr);
  CHECK(right->id == "lane_s1_l0");
  CHECK(store->lane_successors("lane_s2_l0").empty());
  CHECK(code_of([&] { store->lane_successors("nope"); }) == ErrorCode::unknown_id);
  CHECK(code_of([&] { store->lane_successors("crosswalk_end"); }) == ErrorCode::invalid_argument);

  LaneAttributes iso;
  iso.centerline = Geometry::linestring({{0, 0, 0}, {1, 0, 0}}, false);
  const auto poly = Geometry::polygon({{{0, -1, 0}, {1, -1, 0}, {1, 1, 0}, {0, 1, 0}, {0, -1, 0}}}, false);
  const auto alone = MapStore::from_objects({{"iso", MapLayer::lane, poly, iso, {}}});
  CHECK(alone->lane_successors("iso").empty());
  CHECK(alone->lane_neighbors("iso") == std::pair<const MapObject*, const MapObject*>{nullptr, nullptr});

  iso.successors = {"ghost"};
  const auto dangling = MapStore::from_objects({{"iso", MapLayer::lane, poly, iso, {}}});
  CHECK(code_of([&] { dangling->lane_successors("iso"); }) == ErrorCode::dangling_reference);
  const auto issues = dangling->validate();
  REQUIRE(issues.size() == 1);
  CHECK(issues[0] == ReferenceIssue{"iso", "successors", "ghost"});
}

TEST_CASE("validate reports every injected dangling reference") {
  std::mt19937_64 rng(99);
  const auto base = grid_map({2, 2, 80.0, 3.5, false});
  REQUIRE(MapStore::from_objects(base)->validate().empty());
  for (int trial = 0; trial < 20; ++trial) {
    auto objs = base;
    const std::size_t k = rng() % 6;
    std::set<std::string> touched;
    for (std::size_t i = 0; i < k; ++i) {
      auto& o = objs[rng() % objs.size()];
      const std::string ghost = "ghost_" + std::to_string(trial) + "_" + std::to_string(i);
      if (auto* lane = std::get_if<LaneAttributes>(&o.attributes)) lane->successors.push_back(ghost);
      else if (auto* g = std::get_if<LaneGroupAttributes>(&o.attributes)) g->lane_ids.push_back(ghost);
      else if (auto* in = std::get_if<IntersectionAttributes>(&o.attributes)) in->lane_group_ids.push_back(ghost);
      else {
        o.layer = MapLayer::lane_group;
        if (!layer_is_polygon(base[&o - objs.data()].layer)) {
          o.geometry = Geometry::polygon({{{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 0, 0}}}, false);
        }
        o.attributes = LaneGroupAttributes{{ghost}};
        o.mesh.reset();
      }
    }
    CHECK(MapStore::from_objects(objs)->validate().size() == k);
  }
}

TEST_CASE("map file round trip and lazy decode") {
  const auto path = temp_path("rt.arrow");
  auto objs = random_map_objects(2000, 8);
  auto grid = grid_map({2, 3, 90.0, 3.5, true});
  objs.insert(objs.end(), grid.begin(), grid.end());
  const auto store = MapStore::from_objects(objs, MapScope::dataset_wide);
  store->write(path);

  const auto loaded = MapStore::load(path);
  CHECK(loaded->scope() == MapScope::dataset_wide);
  CHECK(loaded->decode_count() == 0);
  REQUIRE(loaded->size() == store->size());
  for (std::size_t i = 0; i < store->size(); ++i) {
    CHECK(loaded->id_at(i) == store->id_at(i));
    CHECK(loaded->bbox_at(i) == store->bbox_at(i));
  }
  const std::array lanes{MapLayer::lane};
  const auto hits = loaded->objects_in_radius(Vec2(500, 500), 30.0, lanes);
  CHECK(loaded->decode_count() > 0);
  CHECK(loaded->decode_count() < loaded->size() / 10);
  CHECK(loaded->all_objects() == store->all_objects());
  CHECK(loaded->decode_count() == loaded->size());

  const auto again = temp_path("rt2.arrow");
  loaded->write(again);
  std::ifstream a(path, std::ios::binary), b(again, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
  CHECK(sa == sb);

  std::ofstream(temp_path("trunc.arrow"), std::ios::binary).write(sa.data(), static_cast<std::streamsize>(sa.size() / 2));
  CHECK(code_of([&] { MapStore::load(temp_path("x") / "missing.arrow"); }) == ErrorCode::io_failure);
}

TEST_CASE("truncated map file is corrupt") {
  const auto path = temp_path("t_full.arrow");
  MapStore::from_objects(straight_road_map({}))->write(path);
  std::ifstream in(path, std::ios::binary);
  const std::string s((std::istreambuf_iterator<char>(in)), {});
  const auto cut = temp_path("t_cut.arrow");
  std::ofstream(cut, std::ios::binary).write(s.data(), static_cast<std::streamsize>(s.size() - 40));
  CHECK(code_of([&] { MapStore::load(cut); }) == ErrorCode::corrupt_file);
}

TEST_CASE("geojson round trip") {
  auto objs = grid_map({2, 2, 60.0, 3.5, true});
  auto road = straight_road_map({2, 2, 40.0, 3.5, {500.0, 500.0}});
  objs.insert(objs.end(), road.begin(), road.end());
  const auto store = MapStore::from_objects(objs);
  const auto dir = temp_path("geojson");
  export_geojson(*store, dir);
  CHECK(fs::exists(dir / "lane.geojson"));
  CHECK(!fs::exists(dir / "stop_zone.geojson"));
  auto back = import_geojson(dir);
  std::sort(back.begin(), back.end(), [](auto& a, auto& b) { return a.id < b.id; });
  CHECK(back == store->all_objects());
}

TEST_CASE("ear clipping preserves area") {
  auto area = [](const std::vector<Vec3>& ring) {
    double a = 0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) a += ring[i].x() * ring[i + 1].y() - ring[i + 1].x() * ring[i].y();
    return std::abs(a) / 2;
  };
  for (const auto& o : random_map_objects(400, 21)) {
    if (!layer_is_polygon(o.layer)) continue;
    const auto mesh = triangulate_polygon(o.geometry);
    const auto& outer = o.geometry.rings[0];
    CHECK(mesh.triangles.size() == outer.size() - 3);
    double sum = 0;
    for (const auto& t : mesh.triangles) sum += area({mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]], mesh.vertices[t[0]]});
    CHECK(sum == doctest::Approx(area(outer)).epsilon(1e-9));
    CHECK(decode_mesh(encode_mesh(mesh)) == mesh);
  }
}
