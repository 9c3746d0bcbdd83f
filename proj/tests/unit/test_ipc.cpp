#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "d123/error.hpp"
#include "d123/ipc/flatbuffer.hpp"
#include "d123/ipc/ipc_file.hpp"

using namespace d123;
using namespace d123::ipc;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("d123_test_ipc_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Schema sample_schema() {
  Schema s;
  s.fields = {
      {"timestamp_us", DataType::int64(), false},
      {"value", DataType::float64(), true},
      {"label", DataType::utf8(), false},
      {"blob", DataType::binary(), true},
      {"state", DataType::uint8(), false},
      {"count", DataType::int32(), false},
      {"tags", DataType::list_of(DataType::utf8()), false},
      {"speeds", DataType::list_of(DataType::float64(), true), false},
  };
  s.metadata = {{"d123.test", "{\"a\":1}"}, {"other", "x"}};
  return s;
}

void append_row(std::vector<ColumnBuilder>& cols, std::int64_t i) {
  cols[0].append_i64(1000 + i * 10);
  if (i % 3 == 0) {
    cols[1].append_null();
  } else {
    cols[1].append_f64(0.5 * static_cast<double>(i));
  }
  cols[2].append_string("row" + std::to_string(i));
  if (i % 4 == 1) {
    cols[3].append_null();
  } else {
    std::vector<std::uint8_t> b(static_cast<std::size_t>(i % 5), static_cast<std::uint8_t>(i));
    cols[3].append_binary(b);
  }
  cols[4].append_u8(static_cast<std::uint8_t>(i % 256));
  cols[5].append_i32(static_cast<std::int32_t>(-i));
  for (std::int64_t k = 0; k < i % 3; ++k) cols[6].child().append_string("t" + std::to_string(k));
  cols[6].finish_list_entry();
  for (std::int64_t k = 0; k < i % 4; ++k) {
    if (k == 1) {
      cols[7].child().append_null();
    } else {
      cols[7].child().append_f64(static_cast<double>(k));
    }
  }
  cols[7].finish_list_entry();
}

std::filesystem::path write_sample(const std::filesystem::path& dir, std::int64_t rows, std::int64_t batch) {
  const auto path = dir / "sample.arrow";
  const Schema schema = sample_schema();
  IpcFileWriter writer(path, schema);
  for (std::int64_t start = 0; start < rows; start += batch) {
    std::vector<ColumnBuilder> cols;
    for (const auto& f : schema.fields) cols.emplace_back(f);
    for (std::int64_t i = start; i < std::min(rows, start + batch); ++i) append_row(cols, i);
    writer.write_batch(cols);
  }
  writer.finish();
  return path;
}

}  // namespace

TEST_CASE("flatbuffer encode/decode") {
  fb::Node inner = fb::Node::table();
  inner.scalar<std::int64_t>(0, -42).scalar<std::uint8_t>(2, 7);
  fb::Node root = fb::Node::table();
  root.scalar<std::int16_t>(0, 4);
  root.child(1, fb::Node::string("hello"));
  root.child(2, std::move(inner));
  root.child(3, fb::Node::offset_vector({fb::Node::string("a"), fb::Node::string("bc")}));
  std::vector<std::uint8_t> structs(16, 0);
  structs[0] = 9;
  root.child(4, fb::Node::inline_vector(structs, 1, 8));
  const auto buf = fb::encode(root);
  CHECK(buf.size() % 8 == 0);

  const auto t = fb::TableView::root(buf);
  CHECK(t.scalar<std::int16_t>(0, 0) == 4);
  CHECK(*t.string(1) == "hello");
  CHECK(t.table(2)->scalar<std::int64_t>(0, 0) == -42);
  CHECK(t.table(2)->scalar<std::uint8_t>(2, 0) == 7);
  CHECK_FALSE(t.table(2)->has(1));
  CHECK(t.vector(3)->size() == 2);
  CHECK(t.vector(3)->string(1) == "bc");
  const auto v = t.vector(4);
  CHECK(v->element(0, 16)[0] == 9);
  CHECK((v->element(0, 16).data() - buf.data()) % 8 == 0);
  CHECK_FALSE(t.has(9));
}

TEST_CASE("ipc file round-trip across batches") {
  const auto dir = temp_dir("roundtrip");
  const auto path = write_sample(dir, 2500, 1024);
  const auto reader = IpcFileReader::open(path);
  CHECK(reader->num_rows() == 2500);
  CHECK(reader->num_batches() == 3);
  CHECK(reader->schema().fields == sample_schema().fields);
  CHECK(reader->schema().metadata_value("d123.test") == "{\"a\":1}");

  for (std::int64_t row : {0, 1, 2, 3, 5, 1023, 1024, 2047, 2499}) {
    const auto [b, r] = reader->locate(row);
    CHECK(reader->column(b, "timestamp_us").i64(r) == 1000 + row * 10);
    const auto value = reader->column(b, "value");
    CHECK(value.is_null(r) == (row % 3 == 0));
    if (row % 3 != 0) CHECK(value.f64(r) == 0.5 * static_cast<double>(row));
    CHECK(reader->column(b, "label").string(r) == "row" + std::to_string(row));
    const auto blob = reader->column(b, "blob");
    CHECK(blob.is_null(r) == (row % 4 == 1));
    if (row % 4 != 1) {
      CHECK(blob.binary(r).size() == static_cast<std::size_t>(row % 5));
    }
    CHECK(reader->column(b, "state").u8(r) == row % 256);
    CHECK(reader->column(b, "count").i32(r) == -row);
    const auto tags = reader->column(b, "tags");
    const auto [t0, t1] = tags.list_range(r);
    CHECK(t1 - t0 == row % 3);
    if (t1 > t0) CHECK(tags.child().string(t0) == "t0");
    const auto speeds = reader->column(b, "speeds");
    const auto [s0, s1] = speeds.list_range(r);
    CHECK(s1 - s0 == row % 4);
    if (s1 - s0 >= 2) {
      CHECK(speeds.child().is_null(s0 + 1));
      CHECK(speeds.child().f64(s0) == 0.0);
    }
  }
}

TEST_CASE("empty file has schema and no batches") {
  const auto dir = temp_dir("empty");
  const auto path = write_sample(dir, 0, 1024);
  const auto reader = IpcFileReader::open(path);
  CHECK(reader->num_rows() == 0);
  CHECK(reader->num_batches() == 0);
  CHECK(reader->schema().fields.size() == 8);
}

TEST_CASE("opening reads metadata only; one row touches one batch") {
  const auto dir = temp_dir("lazy");
  const auto path = write_sample(dir, 10000, 1024);
  const auto reader = IpcFileReader::open(path);
  CHECK(reader->counters().body_bytes == 0);
  const auto [b, r] = reader->locate(5000);
  const auto col = reader->column(b, "label");
  CHECK(col.string(r) == "row5000");
  const auto file_size = std::filesystem::file_size(path);
  CHECK(reader->counters().body_bytes > 0);
  CHECK(reader->counters().body_bytes * 20 < file_size);
}

TEST_CASE("truncated and garbage files raise CorruptFile naming the file") {
  const auto dir = temp_dir("corrupt");
  const auto path = write_sample(dir, 100, 1024);
  const auto size = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, size - 7);
  try {
    IpcFileReader::open(path);
    FAIL("expected CorruptFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::corrupt_file);
    CHECK(std::string(e.what()).find("sample.arrow") != std::string::npos);
  }
  std::ofstream(dir / "junk.arrow") << "not an arrow file at all, just text";
  CHECK_THROWS_AS(IpcFileReader::open(dir / "junk.arrow"), Error);

  // Random byte flips in the footer never crash the reader.
  const auto good = write_sample(dir, 50, 1024);
  std::vector<char> bytes(std::filesystem::file_size(good));
  std::ifstream(good, std::ios::binary).read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    auto copy = bytes;
    const std::size_t pos = copy.size() - 10 - (rng() % 400);
    copy[pos] = static_cast<char>(rng());
    const auto p = dir / "flipped.arrow";
    std::ofstream(p, std::ios::binary).write(copy.data(), static_cast<std::streamsize>(copy.size()));
    try {
      const auto r = IpcFileReader::open(p);
      for (std::size_t bi = 0; bi < r->num_batches(); ++bi)
        for (std::size_t c = 0; c < r->schema().fields.size(); ++c) (void)r->column(bi, c);
    } catch (const Error&) {
    }
  }
}

TEST_CASE("reads a file produced by an independent Arrow implementation") {
  const std::filesystem::path fixture = std::filesystem::path(D123_FIXTURE_DIR) / "pyarrow_written.arrow";
  REQUIRE(std::filesystem::exists(fixture));
  const auto reader = IpcFileReader::open(fixture);
  CHECK(reader->schema().metadata_value("d123.origin") == "pyarrow");
  REQUIRE(reader->num_rows() == 5);
  std::int64_t seen = 0;
  for (std::size_t b = 0; b < reader->num_batches(); ++b) {
    const auto ts = reader->column(b, "timestamp_us");
    const auto name = reader->column(b, "name");
    const auto val = reader->column(b, "value");
    const auto items = reader->column(b, "items");
    const auto code = reader->column(b, "code");
    for (std::int64_t r = 0; r < ts.length(); ++r, ++seen) {
      CHECK(ts.i64(r) == 100 * seen);
      CHECK(name.string(r) == "n" + std::to_string(seen));
      CHECK(val.is_null(r) == (seen == 2));
      if (seen != 2) CHECK(val.f64(r) == 1.5 * static_cast<double>(seen));
      const auto [i0, i1] = items.list_range(r);
      CHECK(i1 - i0 == seen);
      CHECK(code.u8(r) == seen);
    }
  }
}
