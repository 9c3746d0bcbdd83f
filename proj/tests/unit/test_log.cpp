#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "d123/error.hpp"
#include "d123/log/log_handle.hpp"
#include "d123/log/log_writer.hpp"

using namespace d123;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("d123_test_log_" + name);
  fs::remove_all(dir);
  return dir;
}

LogMetadata sample_metadata() {
  LogMetadata m;
  m.log_id = "log-0001";
  m.dataset = "unit";
  m.vehicle.rear_axle_to_center = 1.39;
  CameraModel cam;
  cam.model = CameraProjection::pinhole_brown_conrady;
  cam.fx = cam.fy = 1000.0;
  cam.cx = 960.0;
  cam.cy = 540.0;
  cam.distortion = {0.1, -0.01, 0.0, 0.001, 0.0};
  cam.width = 1920;
  cam.height = 1080;
  cam.extrinsic = camera_extrinsic_looking(Vec3(1.5, 0.0, 1.6), 0.3);
  m.cameras["front"] = cam;
  m.lidars["top"] = SE3::from_yaw(0.01, Vec3(0.9, 0.0, 1.9));
  m.map_ref = "map.arrow";
  m.label_space = "unit-labels";
  return m;
}

SE3 random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return SE3(Vec3(100 * n(rng), 100 * n(rng), n(rng)), q);
}

std::vector<std::uint8_t> random_points_bytes(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<float> u(-50.0f, 50.0f);
  std::vector<float> pts(n * 4);
  for (auto& v : pts) v = u(rng);
  return encode_points(pts, Codec(CodecKind::raw_f32le));
}

std::vector<EventStream> sample_streams(std::mt19937_64& rng, int rows) {
  std::vector<EgoStateRecord> ego;
  std::vector<BoxFrame> boxes;
  std::vector<TrafficLightFrame> lights;
  std::vector<CameraFrameRecord> cams;
  std::vector<LidarSweepRecord> lidar;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < rows; ++i) {
    const TimePoint t = from_micros(1'700'000'000'000'000 + i * 50'000 + (i % 3));
    ego.push_back({t, random_pose(rng), Vec3(n(rng), n(rng), n(rng)), Vec3(n(rng), n(rng), n(rng)), n(rng)});
    BoxFrame f{t, {}};
    for (int k = 0; k < i % 4; ++k) {
      BoxRecord b{t, "track" + std::to_string(k), k % 2 ? "car" : "traffic_cone", random_pose(rng),
                  Vec3(4.0 + k, 1.8, 1.5), std::nullopt};
      if (k % 2 == 0) b.velocity = Vec3(n(rng), n(rng), 0.0);
      f.boxes.push_back(b);
    }
    boxes.push_back(f);
    TrafficLightFrame tl{t, {}};
    if (i % 2 == 0) tl.lights.push_back({t, "lane_" + std::to_string(i), TrafficLightState(i % 5)});
    lights.push_back(tl);
    cams.push_back({t + Duration(7), "front",
                    PayloadRef::inline_data(Codec(i % 2 ? CodecKind::jpeg : CodecKind::png),
                                            std::vector<std::uint8_t>(static_cast<std::size_t>(10 + i), std::uint8_t(i)))});
    auto pts = random_points_bytes(rng, static_cast<std::size_t>(5 + i));
    Codec codec(CodecKind::raw_f32le);
    if (i % 2 == 1) {
      std::vector<float> xyzi(pts.size() / 4);
      std::memcpy(xyzi.data(), pts.data(), pts.size());
      codec = Codec(CodecKind::raw_deflate);
      pts = encode_points(xyzi, codec);
    }
    lidar.push_back({t + Duration(3), t + Duration(40'000), "top", PayloadRef::inline_data(codec, pts)});
  }
  return {{ModalityKey::ego_state(), ego},
          {ModalityKey::boxes(), boxes},
          {ModalityKey::traffic_lights(), lights},
          {ModalityKey::camera("front"), cams},
          {ModalityKey::lidar("top"), lidar}};
}

bool same_payload_content(const PayloadRef& a, const fs::path& da, const PayloadRef& b, const fs::path& db) {
  return a.codec == b.codec && a.frame_index == b.frame_index && decode_payload(a, da) == decode_payload(b, db);
}

}  // namespace

TEST_CASE("empty stream list writes a directory with no modality files") {
  const auto dir = temp_dir("empty");
  write_log(dir, {}, sample_metadata());
  CHECK(fs::is_directory(dir));
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.path().extension() == ".arrow";
  CHECK(files == 0);
  CHECK_FALSE(fs::exists(dir / kLockFileName));
  const auto h = open_log(dir);
  CHECK(h->modalities().empty());
}

TEST_CASE("write/open round-trip is field-exact in both storage modes") {
  std::mt19937_64 rng(7);
  const auto streams = sample_streams(rng, 2100);
  const auto meta = sample_metadata();
  const auto self_dir = temp_dir("self");
  const auto ext_dir = temp_dir("ext");
  write_log(self_dir, streams, meta, {StorageMode::self_contained, {}});
  write_log(ext_dir, streams, meta, {StorageMode::external, {}});
  CHECK(fs::exists(ext_dir / "blobs/lidar_top/0.bin"));
  CHECK(fs::exists(ext_dir / "blobs/camera_front/2099.bin"));
  CHECK_FALSE(fs::exists(self_dir / "blobs"));

  const auto hs = open_log(self_dir);
  const auto he = open_log(ext_dir);
  CHECK(hs->metadata() == meta);
  CHECK(he->metadata() == meta);
  REQUIRE(hs->modalities().size() == 5);
  for (const auto& s : streams) {
    const auto back = hs->read_stream(s.key);
    CHECK(back == s);
    const auto ext = he->read_stream(s.key);
    CHECK(ext.size() == s.size());
    CHECK(he->timestamps(s.key) == s.timestamps());
  }
  const auto cam_stream = he->read_stream(ModalityKey::camera("front"));
  const auto lidar_stream = he->read_stream(ModalityKey::lidar("top"));
  const auto& cams = std::get<std::vector<CameraFrameRecord>>(cam_stream.rows);
  const auto& lids = std::get<std::vector<LidarSweepRecord>>(lidar_stream.rows);
  for (std::size_t i = 0; i < cams.size(); ++i) {
    CHECK(cams[i].payload.location == PayloadLocation::external);
    REQUIRE(same_payload_content(cams[i].payload, ext_dir, hs->camera("front", static_cast<std::int64_t>(i)).payload,
                                 self_dir));
    REQUIRE(same_payload_content(lids[i].payload, ext_dir, hs->lidar("top", static_cast<std::int64_t>(i)).payload,
                                 self_dir));
  }
  // The external log rewritten self-contained equals the first one.
  const auto again = temp_dir("again");
  std::vector<EventStream> ext_streams;
  for (const auto& k : he->modalities()) ext_streams.push_back(he->read_stream(k));
  write_log(again, ext_streams, meta, {StorageMode::self_contained, ext_dir});
  const auto ha = open_log(again);
  for (const auto& s : streams) CHECK(ha->read_stream(s.key) == s);
}

TEST_CASE("writes are byte-identical across runs") {
  std::mt19937_64 rng(3);
  const auto streams = sample_streams(rng, 40);
  const auto a = temp_dir("det_a");
  const auto b = temp_dir("det_b");
  write_log(a, streams, sample_metadata(), {StorageMode::external, {}});
  write_log(b, streams, sample_metadata(), {StorageMode::external, {}});
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto other = b / fs::relative(e.path(), a);
    std::ifstream fa(e.path(), std::ios::binary), fb(other, std::ios::binary);
    const std::string sa((std::istreambuf_iterator<char>(fa)), {}), sb((std::istreambuf_iterator<char>(fb)), {});
    CHECK_MESSAGE(sa == sb, e.path().string());
  }
}

TEST_CASE("six cameras, one lidar and boxes produce eight modality files") {
  auto meta = sample_metadata();
  std::vector<EventStream> streams;
  for (int c = 0; c < 6; ++c) {
    const std::string id = "cam" + std::to_string(c);
    meta.cameras[id] = meta.cameras.at("front");
    std::vector<CameraFrameRecord> rows;
    for (int i = 0; i < 24; ++i) {
      rows.push_back({from_micros(i * 83'333), id, PayloadRef::inline_data(Codec(CodecKind::jpeg), {1, 2, 3})});
    }
    streams.push_back({ModalityKey::camera(id), rows});
  }
  meta.cameras.erase("front");
  std::vector<LidarSweepRecord> sweeps;
  for (int i = 0; i < 40; ++i) {
    sweeps.push_back({from_micros(i * 50'000), from_micros(i * 50'000 + 49'000), "top",
                      PayloadRef::inline_data(Codec(CodecKind::raw_f32le), std::vector<std::uint8_t>(16, 0))});
  }
  streams.push_back({ModalityKey::lidar("top"), sweeps});
  std::vector<BoxFrame> frames;
  for (int i = 0; i < 4; ++i) frames.push_back({from_micros(i * 500'000), {}});
  streams.push_back({ModalityKey::boxes(), frames});
  const auto dir = temp_dir("rig");
  write_log(dir, streams, meta);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir)) files += e.path().extension() == ".arrow";
  CHECK(files == 8);
  CHECK(open_log(dir)->modalities().size() == 8);
}

TEST_CASE("write errors") {
  const auto meta = sample_metadata();
  const auto dir = temp_dir("errors");
  std::vector<EgoStateRecord> ego{{from_micros(10), {}, Vec3::Zero(), Vec3::Zero(), 0.0},
                                  {from_micros(10), {}, Vec3::Zero(), Vec3::Zero(), 0.0}};
  std::vector<EventStream> dup_ts{{ModalityKey::ego_state(), ego}};
  auto code_of = [&](const std::vector<EventStream>& s) {
    try {
      write_log(dir, s, meta);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::invalid_argument;
  };
  CHECK(code_of(dup_ts) == ErrorCode::unsorted_timestamps);
  ego[1].timestamp = from_micros(5);
  CHECK(code_of({{ModalityKey::ego_state(), ego}}) == ErrorCode::unsorted_timestamps);
  ego.pop_back();
  CHECK(code_of({{ModalityKey::ego_state(), ego}, {ModalityKey::ego_state(), ego}}) ==
        ErrorCode::duplicate_modality_file);
  std::vector<CameraFrameRecord> unknown{{from_micros(1), "rear", PayloadRef::inline_data(Codec("x"), {1})}};
  CHECK(code_of({{ModalityKey::camera("rear"), unknown}}) == ErrorCode::unknown_sensor_id);

  fs::create_directories(dir);
  std::ofstream(dir / kLockFileName) << "";
  CHECK(code_of({{ModalityKey::ego_state(), ego}}) == ErrorCode::io_failure);
  fs::remove(dir / kLockFileName);
  CHECK_NOTHROW(write_log(dir, std::vector<EventStream>{{ModalityKey::ego_state(), ego}}, meta));

  CHECK_THROWS_AS(PayloadRef::external_file(Codec("png"), "../escape.png"), Error);
  CHECK_THROWS_AS(PayloadRef::external_file(Codec("png"), "/abs.png"), Error);
  CHECK_THROWS_AS(PayloadRef::inline_data(Codec("png"), {}), Error);
}

TEST_CASE("open errors: truncated file, metadata mismatch, unsorted stored timestamps") {
  std::mt19937_64 rng(11);
  const auto streams = sample_streams(rng, 30);
  const auto dir = temp_dir("open_err");
  write_log(dir, streams, sample_metadata());

  const auto copy = temp_dir("open_err_trunc");
  fs::copy(dir, copy, fs::copy_options::recursive);
  fs::resize_file(copy / "boxes.arrow", fs::file_size(copy / "boxes.arrow") / 2);
  try {
    open_log(copy);
    FAIL("expected CorruptFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::corrupt_file);
    CHECK(std::string(e.what()).find("boxes.arrow") != std::string::npos);
  }

  const auto mixed = temp_dir("open_err_mixed");
  auto other = sample_metadata();
  other.vehicle.length = 5.0;
  write_log(mixed, std::span(streams).subspan(0, 1), other);
  fs::copy_file(dir / "boxes.arrow", mixed / "boxes.arrow");
  try {
    open_log(mixed);
    FAIL("expected MetadataMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::metadata_mismatch);
  }

  // Hand-written file with a repeated timestamp is rejected when the stream is first used.
  const auto bad = temp_dir("open_err_unsorted");
  fs::create_directories(bad);
  ipc::Schema schema = ipc::IpcFileReader::open(dir / "ego_state.arrow")->schema();
  {
    ipc::IpcFileWriter w(bad / "ego_state.arrow", schema);
    std::vector<ipc::ColumnBuilder> cols;
    for (const auto& f : schema.fields) cols.emplace_back(f);
    for (int i = 0; i < 3; ++i) {
      cols[0].append_i64(i == 2 ? 1 : i);
      for (std::size_t c = 1; c < cols.size(); ++c) cols[c].append_f64(c == 4 ? 1.0 : 0.0);
    }
    w.write_batch(cols);
    w.finish();
  }
  const auto h = open_log(bad);
  CHECK(h->ego_state(1).timestamp == from_micros(1));
  try {
    h->timestamps(ModalityKey::ego_state());
    FAIL("expected UnsortedTimestamps");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unsorted_timestamps);
  }
  CHECK_THROWS_AS(h->boxes(0), Error);
}

TEST_CASE("each modality file is readable standalone") {
  std::mt19937_64 rng(5);
  const auto streams = sample_streams(rng, 12);
  const auto dir = temp_dir("standalone");
  write_log(dir, streams, sample_metadata());
  for (const auto& s : streams) {
    const auto solo = temp_dir("standalone_" + s.key.name());
    fs::create_directories(solo);
    fs::copy_file(dir / s.key.file_name(), solo / s.key.file_name());
    const auto h = open_log(solo);
    CHECK(h->metadata() == sample_metadata());
    CHECK(h->read_stream(s.key) == s);
  }
}

TEST_CASE("opening reads no rows and one row touches one row group") {
  std::vector<EgoStateRecord> ego;
  for (int i = 0; i < 10'000; ++i) ego.push_back({from_micros(i * 1000), SE3::from_yaw(0.001 * i), {}, {}, 0.0});
  const auto dir = temp_dir("lazy");
  write_log(dir, std::vector<EventStream>{{ModalityKey::ego_state(), ego}}, sample_metadata());
  const auto h = open_log(dir);
  const auto file = h->stream_file(ModalityKey::ego_state());
  CHECK(file->counters().body_bytes == 0);
  CHECK(h->rows_read() == 0);
  CHECK(h->ego_state(5000) == ego[5000]);
  CHECK(h->rows_read() == 1);
  const auto size = fs::file_size(dir / "ego_state.arrow");
  // One row group holds 1024 of 10k rows; the row read touches at most that group.
  CHECK(file->counters().body_bytes <= size / 9);
  CHECK(file->counters().body_bytes > 0);
}

TEST_CASE("decode_payload") {
  const auto dir = temp_dir("payload");
  fs::create_directories(dir / "blobs");
  const auto zero = PayloadRef::inline_data(Codec(CodecKind::raw_f32le), std::vector<std::uint8_t>(16, 0));
  const auto pc = std::get<PointCloud>(decode_payload(zero, dir));
  CHECK(pc.size() == 1);
  CHECK(pc.xyzi == std::vector<float>{0, 0, 0, 0});

  std::mt19937_64 rng(1);
  const auto bytes = random_points_bytes(rng, 10'000);
  std::ofstream(dir / "blobs/p.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  const auto in = PayloadRef::inline_data(Codec(CodecKind::raw_f32le), bytes);
  const auto ext = PayloadRef::external_file(Codec(CodecKind::raw_f32le), "blobs/p.bin");
  CHECK(decode_payload(in, dir) == decode_payload(ext, dir));

  const auto raw = decode_points(in, dir);
  const auto deflated = encode_points(raw.xyzi, Codec(CodecKind::raw_deflate));
  CHECK(deflated.size() < bytes.size());
  const auto back = decode_points(PayloadRef::inline_data(Codec(CodecKind::raw_deflate), deflated), dir);
  CHECK(std::memcmp(back.xyzi.data(), raw.xyzi.data(), raw.xyzi.size() * sizeof(float)) == 0);

  auto code = [&](const PayloadRef& p, bool points) {
    try {
      if (points) {
        decode_points(p, dir);
      } else {
        decode_payload(p, dir);
      }
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::invalid_argument;
  };
  CHECK(code(PayloadRef::inline_data(Codec(CodecKind::raw_f32le), std::vector<std::uint8_t>(15, 0)), false) ==
        ErrorCode::payload_corrupt);
  CHECK(code(PayloadRef::inline_data(Codec(CodecKind::raw_deflate), {1, 2, 3}), false) == ErrorCode::payload_corrupt);
  CHECK(code(PayloadRef::external_file(Codec(CodecKind::raw_f32le), "blobs/missing.bin"), false) ==
        ErrorCode::missing_payload);
  CHECK(code(PayloadRef::inline_data(Codec(CodecKind::png), {1}), true) == ErrorCode::codec_unsupported_for_decode);
  const auto opaque = decode_payload(PayloadRef::inline_data(Codec(CodecKind::laz), {4, 5}), dir);
  CHECK(std::get<std::vector<std::uint8_t>>(opaque) == std::vector<std::uint8_t>{4, 5});
}

TEST_CASE("unknown codecs and mp4 frame indices round-trip") {
  auto meta = sample_metadata();
  const auto src = temp_dir("mp4_src");
  fs::create_directories(src / "video");
  std::ofstream(src / "video/front.mp4", std::ios::binary) << "fake-container";
  std::vector<CameraFrameRecord> rows;
  for (int i = 0; i < 5; ++i) {
    auto p = PayloadRef::external_file(Codec(CodecKind::mp4), "video/front.mp4");
    p.frame_index = i;
    rows.push_back({from_micros(i), "front", p});
  }
  rows.push_back({from_micros(10), "front", PayloadRef::inline_data(Codec("heif-experimental"), {9, 9})});
  const std::vector<EventStream> streams{{ModalityKey::camera("front"), rows}};
  const auto dir = temp_dir("mp4");
  write_log(dir, streams, meta, {StorageMode::external, src});
  const auto h = open_log(dir);
  const auto first = h->camera("front", 0);
  CHECK(first.payload.frame_index == 0);
  CHECK(h->camera("front", 4).payload.relative_path == first.payload.relative_path);
  CHECK(h->camera("front", 4).payload.frame_index == 4);
  const auto last = h->camera("front", 5);
  CHECK(last.payload.codec.name() == "heif-experimental");
  CHECK(last.payload.codec.kind() == CodecKind::unknown);
  CHECK(std::get<std::vector<std::uint8_t>>(h->decode(last.payload)) == std::vector<std::uint8_t>{9, 9});
  CHECK(std::get<std::vector<std::uint8_t>>(h->decode(first.payload)).size() == 14);
}
