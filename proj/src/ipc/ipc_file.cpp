#include "d123/ipc/ipc_file.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "d123/error.hpp"
#include "d123/ipc/flatbuffer.hpp"

namespace d123::ipc {

namespace {

constexpr char kMagic[6] = {'A', 'R', 'R', 'O', 'W', '1'};
constexpr std::uint32_t kContinuation = 0xFFFFFFFFu;
constexpr std::int16_t kMetadataV5 = 4;

// Union discriminants from the Arrow flatbuffer schema.
constexpr std::uint8_t kTypeInt = 2;
constexpr std::uint8_t kTypeFloatingPoint = 3;
constexpr std::uint8_t kTypeBinary = 4;
constexpr std::uint8_t kTypeUtf8 = 5;
constexpr std::uint8_t kTypeList = 12;
constexpr std::uint8_t kHeaderSchema = 1;
constexpr std::uint8_t kHeaderRecordBatch = 3;
constexpr std::int16_t kPrecisionDouble = 2;

std::size_t pad8(std::size_t n) { return (n + 7) / 8 * 8; }

template <class T>
void append_raw(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

fb::Node encode_key_values(const std::vector<std::pair<std::string, std::string>>& kv) {
  std::vector<fb::Node> items;
  for (const auto& [k, v] : kv) {
    items.push_back(fb::Node::table().child(0, fb::Node::string(k)).child(1, fb::Node::string(v)));
  }
  return fb::Node::offset_vector(std::move(items));
}

fb::Node encode_field(const Field& field) {
  fb::Node type = fb::Node::table();
  std::uint8_t type_id = 0;
  std::vector<fb::Node> children;
  switch (field.type.id) {
    case TypeId::uint8:
      type.scalar<std::int32_t>(0, 8).scalar<std::uint8_t>(1, 0);
      type_id = kTypeInt;
      break;
    case TypeId::int32:
      type.scalar<std::int32_t>(0, 32).scalar<std::uint8_t>(1, 1);
      type_id = kTypeInt;
      break;
    case TypeId::int64:
      type.scalar<std::int32_t>(0, 64).scalar<std::uint8_t>(1, 1);
      type_id = kTypeInt;
      break;
    case TypeId::float64:
      type.scalar<std::int16_t>(0, kPrecisionDouble);
      type_id = kTypeFloatingPoint;
      break;
    case TypeId::utf8: type_id = kTypeUtf8; break;
    case TypeId::binary: type_id = kTypeBinary; break;
    case TypeId::list:
      type_id = kTypeList;
      children.push_back(encode_field(*field.type.child));
      break;
  }
  fb::Node node = fb::Node::table();
  node.child(0, fb::Node::string(field.name));
  node.scalar<std::uint8_t>(1, field.nullable ? 1 : 0);
  node.scalar<std::uint8_t>(2, type_id);
  node.child(3, std::move(type));
  node.child(5, fb::Node::offset_vector(std::move(children)));
  return node;
}

fb::Node encode_schema(const Schema& schema) {
  std::vector<fb::Node> fields;
  for (const auto& f : schema.fields) {
    fields.push_back(encode_field(f));
  }
  fb::Node node = fb::Node::table();
  node.scalar<std::int16_t>(0, 0);  // little endian
  node.child(1, fb::Node::offset_vector(std::move(fields)));
  if (!schema.metadata.empty()) {
    node.child(2, encode_key_values(schema.metadata));
  }
  return node;
}

[[noreturn]] void corrupt(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorCode::corrupt_file, path.string() + ": " + what);
}

Field decode_field(const fb::TableView& t, const std::filesystem::path& path, int depth) {
  if (depth > 8) {
    corrupt(path, "field nesting too deep");
  }
  Field field;
  field.name = std::string(t.string(0).value_or(""));
  field.nullable = t.scalar<std::uint8_t>(1, 0) != 0;
  const auto type_id = t.scalar<std::uint8_t>(2, 0);
  const auto type = t.table(3);
  if (!type) {
    corrupt(path, "field '" + field.name + "' has no type");
  }
  switch (type_id) {
    case kTypeInt: {
      const auto bits = type->scalar<std::int32_t>(0, 0);
      const bool is_signed = type->scalar<std::uint8_t>(1, 0) != 0;
      if (bits == 8 && !is_signed) {
        field.type = DataType::uint8();
      } else if (bits == 32 && is_signed) {
        field.type = DataType::int32();
      } else if (bits == 64 && is_signed) {
        field.type = DataType::int64();
      } else {
        corrupt(path, "unsupported integer width for '" + field.name + "'");
      }
      break;
    }
    case kTypeFloatingPoint:
      if (type->scalar<std::int16_t>(0, 0) != kPrecisionDouble) {
        corrupt(path, "only float64 is supported ('" + field.name + "')");
      }
      field.type = DataType::float64();
      break;
    case kTypeUtf8: field.type = DataType::utf8(); break;
    case kTypeBinary: field.type = DataType::binary(); break;
    case kTypeList: {
      const auto children = t.vector(5);
      if (!children || children->size() != 1) {
        corrupt(path, "list field '" + field.name + "' must have one child");
      }
      auto child = decode_field(children->table(0), path, depth + 1);
      field.type = DataType{TypeId::list, std::make_shared<const Field>(std::move(child))};
      break;
    }
    default:
      corrupt(path, "unsupported column type " + std::to_string(type_id) + " for '" + field.name + "'");
  }
  return field;
}

Schema decode_schema(const fb::TableView& t, const std::filesystem::path& path) {
  Schema schema;
  if (t.scalar<std::int16_t>(0, 0) != 0) {
    corrupt(path, "big-endian files are not supported");
  }
  if (const auto fields = t.vector(1)) {
    for (std::uint32_t i = 0; i < fields->size(); ++i) {
      schema.fields.push_back(decode_field(fields->table(i), path, 0));
    }
  }
  if (const auto kv = t.vector(2)) {
    for (std::uint32_t i = 0; i < kv->size(); ++i) {
      const auto entry = kv->table(i);
      schema.metadata.emplace_back(std::string(entry.string(0).value_or("")), std::string(entry.string(1).value_or("")));
    }
  }
  return schema;
}

void count_layout(const Field& field, std::size_t& nodes, std::size_t& buffers) {
  nodes += 1;
  switch (field.type.id) {
    case TypeId::utf8:
    case TypeId::binary: buffers += 3; break;
    case TypeId::list:
      buffers += 2;
      count_layout(*field.type.child, nodes, buffers);
      break;
    default: buffers += 2; break;
  }
}

struct BodyWriter {
  std::vector<std::uint8_t> body;
  std::vector<std::pair<std::int64_t, std::int64_t>> buffers;
  std::vector<std::pair<std::int64_t, std::int64_t>> nodes;

  void add(const std::uint8_t* data, std::size_t size) {
    buffers.emplace_back(static_cast<std::int64_t>(body.size()), static_cast<std::int64_t>(size));
    body.insert(body.end(), data, data + size);
    body.resize(pad8(body.size()), 0);
  }

  void add_column(const ColumnBuilder& c) {
    nodes.emplace_back(c.length(), c.null_count());
    if (c.null_count() > 0) {
      add(c.validity().data(), (static_cast<std::size_t>(c.length()) + 7) / 8);
    } else {
      add(nullptr, 0);
    }
    switch (c.field().type.id) {
      case TypeId::utf8:
      case TypeId::binary:
        add(reinterpret_cast<const std::uint8_t*>(c.offsets().data()), c.offsets().size() * 4);
        add(c.values().data(), c.values().size());
        break;
      case TypeId::list:
        add(reinterpret_cast<const std::uint8_t*>(c.offsets().data()), c.offsets().size() * 4);
        add_column(*c.child_builder());
        break;
      default:
        add(c.values().data(), c.values().size());
        break;
    }
  }
};

}  // namespace

void IoCounters::reset() {
  files_opened = 0;
  metadata_bytes = 0;
  column_reads = 0;
  body_bytes = 0;
}

IoCounters& global_io_counters() {
  static IoCounters counters;
  return counters;
}

IpcFileWriter::IpcFileWriter(const std::filesystem::path& path, Schema schema)
    : path_(path), schema_(std::move(schema)), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) {
    throw Error(ErrorCode::io_failure, "cannot create " + path.string());
  }
  const char header[8] = {'A', 'R', 'R', 'O', 'W', '1', 0, 0};
  out_.write(header, 8);
  position_ = 8;
  fb::Node message = fb::Node::table();
  message.scalar<std::int16_t>(0, kMetadataV5);
  message.scalar<std::uint8_t>(1, kHeaderSchema);
  message.child(2, encode_schema(schema_));
  message.scalar<std::int64_t>(3, 0);
  write_message(fb::encode(message), {});
  blocks_.clear();  // the schema message is not a record batch block
}

IpcFileWriter::~IpcFileWriter() = default;

void IpcFileWriter::write_message(const std::vector<std::uint8_t>& metadata, const std::vector<std::uint8_t>& body) {
  const std::int64_t start = position_;
  const std::size_t padded = pad8(metadata.size());
  std::vector<std::uint8_t> prefix;
  append_raw<std::uint32_t>(prefix, kContinuation);
  append_raw<std::int32_t>(prefix, static_cast<std::int32_t>(padded));
  out_.write(reinterpret_cast<const char*>(prefix.data()), 8);
  out_.write(reinterpret_cast<const char*>(metadata.data()), static_cast<std::streamsize>(metadata.size()));
  const std::vector<char> zeros(padded - metadata.size(), 0);
  out_.write(zeros.data(), static_cast<std::streamsize>(zeros.size()));
  out_.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out_) {
    throw Error(ErrorCode::io_failure, "write failed for " + path_.string());
  }
  position_ += static_cast<std::int64_t>(8 + padded + body.size());
  blocks_.push_back({start, static_cast<std::int32_t>(8 + padded), static_cast<std::int64_t>(body.size())});
}

void IpcFileWriter::write_batch(std::span<const ColumnBuilder> columns) {
  if (columns.size() != schema_.fields.size()) {
    throw Error(ErrorCode::invalid_argument, "batch column count does not match schema for " + path_.string());
  }
  const std::int64_t length = columns.empty() ? 0 : columns.front().length();
  BodyWriter body;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!(columns[i].field() == schema_.fields[i])) {
      throw Error(ErrorCode::invalid_argument, "column '" + columns[i].field().name + "' does not match schema");
    }
    if (columns[i].length() != length) {
      throw Error(ErrorCode::invalid_argument, "ragged record batch in " + path_.string());
    }
    body.add_column(columns[i]);
  }
  std::vector<std::uint8_t> nodes;
  for (const auto& [len, nulls] : body.nodes) {
    append_raw(nodes, len);
    append_raw(nodes, nulls);
  }
  std::vector<std::uint8_t> buffers;
  for (const auto& [off, len] : body.buffers) {
    append_raw(buffers, off);
    append_raw(buffers, len);
  }
  fb::Node batch = fb::Node::table();
  batch.scalar<std::int64_t>(0, length);
  batch.child(1, fb::Node::inline_vector(std::move(nodes), static_cast<std::uint32_t>(body.nodes.size()), 8));
  batch.child(2, fb::Node::inline_vector(std::move(buffers), static_cast<std::uint32_t>(body.buffers.size()), 8));

  fb::Node message = fb::Node::table();
  message.scalar<std::int16_t>(0, kMetadataV5);
  message.scalar<std::uint8_t>(1, kHeaderRecordBatch);
  message.child(2, std::move(batch));
  message.scalar<std::int64_t>(3, static_cast<std::int64_t>(body.body.size()));
  write_message(fb::encode(message), body.body);
}

void IpcFileWriter::finish() {
  if (finished_) {
    return;
  }
  finished_ = true;
  // End-of-stream marker.
  std::vector<std::uint8_t> eos;
  append_raw<std::uint32_t>(eos, kContinuation);
  append_raw<std::int32_t>(eos, 0);
  out_.write(reinterpret_cast<const char*>(eos.data()), 8);

  std::vector<std::uint8_t> blocks;
  for (const auto& b : blocks_) {
    append_raw(blocks, b.offset);
    append_raw(blocks, b.metadata_length);
    append_raw<std::int32_t>(blocks, 0);
    append_raw(blocks, b.body_length);
  }
  fb::Node footer = fb::Node::table();
  footer.scalar<std::int16_t>(0, kMetadataV5);
  footer.child(1, encode_schema(schema_));
  footer.child(2, fb::Node::inline_vector({}, 0, 8));
  footer.child(3, fb::Node::inline_vector(std::move(blocks), static_cast<std::uint32_t>(blocks_.size()), 8));
  const auto encoded = fb::encode(footer);
  out_.write(reinterpret_cast<const char*>(encoded.data()), static_cast<std::streamsize>(encoded.size()));
  std::vector<std::uint8_t> tail;
  append_raw<std::int32_t>(tail, static_cast<std::int32_t>(encoded.size()));
  tail.insert(tail.end(), kMagic, kMagic + 6);
  out_.write(reinterpret_cast<const char*>(tail.data()), static_cast<std::streamsize>(tail.size()));
  out_.flush();
  if (!out_) {
    throw Error(ErrorCode::io_failure, "write failed for " + path_.string());
  }
  out_.close();
}

std::shared_ptr<const IpcFileReader> IpcFileReader::open(const std::filesystem::path& path) {
  std::shared_ptr<IpcFileReader> reader(new IpcFileReader());
  reader->path_ = path;
  reader->file_ = MappedFile::open(path);
  const auto bytes = reader->file_.bytes();
  if (bytes.size() < 8 + 4 + 6 || std::memcmp(bytes.data(), kMagic, 6) != 0 ||
      std::memcmp(bytes.data() + bytes.size() - 6, kMagic, 6) != 0) {
    corrupt(path, "missing Arrow file magic (truncated or not an Arrow IPC file)");
  }
  std::int32_t footer_length = 0;
  std::memcpy(&footer_length, bytes.data() + bytes.size() - 10, 4);
  if (footer_length <= 0 || static_cast<std::size_t>(footer_length) > bytes.size() - 18) {
    corrupt(path, "bad footer length");
  }
  const auto footer_bytes = bytes.subspan(bytes.size() - 10 - static_cast<std::size_t>(footer_length),
                                          static_cast<std::size_t>(footer_length));
  std::uint64_t metadata_bytes = footer_bytes.size();
  try {
    const auto footer = fb::TableView::root(footer_bytes);
    const auto schema = footer.table(1);
    if (!schema) {
      corrupt(path, "footer has no schema");
    }
    reader->schema_ = decode_schema(*schema, path);
    std::size_t nodes = 0;
    std::size_t buffers = 0;
    for (const auto& f : reader->schema_.fields) {
      reader->column_start_.emplace_back(nodes, buffers);
      count_layout(f, nodes, buffers);
    }

    if (const auto blocks = footer.vector(3)) {
      for (std::uint32_t i = 0; i < blocks->size(); ++i) {
        const auto raw = blocks->element(i, 24);
        std::int64_t offset = 0;
        std::int32_t meta_len = 0;
        std::int64_t body_len = 0;
        std::memcpy(&offset, raw.data(), 8);
        std::memcpy(&meta_len, raw.data() + 8, 4);
        std::memcpy(&body_len, raw.data() + 16, 8);
        if (offset < 8 || meta_len < 8 || body_len < 0 ||
            static_cast<std::uint64_t>(offset) + static_cast<std::uint64_t>(meta_len) + static_cast<std::uint64_t>(body_len) >
                bytes.size()) {
          corrupt(path, "record batch block out of range");
        }
        std::size_t meta_start = static_cast<std::size_t>(offset);
        std::uint32_t marker = 0;
        std::memcpy(&marker, bytes.data() + meta_start, 4);
        meta_start += marker == kContinuation ? 8 : 4;
        const std::size_t meta_end = static_cast<std::size_t>(offset) + static_cast<std::size_t>(meta_len);
        if (meta_start > meta_end) {
          corrupt(path, "record batch metadata out of range");
        }
        const auto meta = bytes.subspan(meta_start, meta_end - meta_start);
        metadata_bytes += meta.size();
        const auto message = fb::TableView::root(meta);
        if (message.scalar<std::uint8_t>(1, 0) != kHeaderRecordBatch) {
          corrupt(path, "footer block is not a record batch");
        }
        const auto rb = message.table(2);
        if (!rb) {
          corrupt(path, "record batch message without header");
        }
        if (rb->has(3)) {
          corrupt(path, "compressed record batches are not supported");
        }
        Batch batch;
        batch.length = rb->scalar<std::int64_t>(0, 0);
        batch.first_row = reader->total_rows_;
        batch.body_offset = meta_end;
        batch.body_length = static_cast<std::size_t>(body_len);
        if (batch.length < 0) {
          corrupt(path, "negative batch length");
        }
        if (const auto n = rb->vector(1)) {
          for (std::uint32_t k = 0; k < n->size(); ++k) {
            const auto e = n->element(k, 16);
            NodeRef ref{};
            std::memcpy(&ref.length, e.data(), 8);
            std::memcpy(&ref.null_count, e.data() + 8, 8);
            batch.nodes.push_back(ref);
          }
        }
        if (const auto b = rb->vector(2)) {
          for (std::uint32_t k = 0; k < b->size(); ++k) {
            const auto e = b->element(k, 16);
            BufferRef ref{};
            std::memcpy(&ref.offset, e.data(), 8);
            std::memcpy(&ref.length, e.data() + 8, 8);
            if (ref.offset < 0 || ref.length < 0 ||
                static_cast<std::uint64_t>(ref.offset) + static_cast<std::uint64_t>(ref.length) > batch.body_length) {
              corrupt(path, "buffer outside record batch body");
            }
            batch.buffers.push_back(ref);
          }
        }
        if (batch.nodes.size() != nodes || batch.buffers.size() != buffers) {
          corrupt(path, "record batch layout does not match schema");
        }
        reader->total_rows_ += batch.length;
        reader->batches_.push_back(std::move(batch));
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::corrupt_file && std::string(e.what()).find(path.string()) == std::string::npos) {
      corrupt(path, e.what());
    }
    throw;
  }
  reader->counters_.files_opened += 1;
  reader->counters_.metadata_bytes += metadata_bytes;
  global_io_counters().files_opened += 1;
  global_io_counters().metadata_bytes += metadata_bytes;
  return reader;
}

std::pair<std::size_t, std::int64_t> IpcFileReader::locate(std::int64_t row) const {
  if (row < 0 || row >= total_rows_) {
    throw Error(ErrorCode::invalid_argument, "row " + std::to_string(row) + " out of range in " + path_.string());
  }
  const auto it = std::upper_bound(batches_.begin(), batches_.end(), row,
                                   [](std::int64_t r, const Batch& b) { return r < b.first_row; });
  const auto index = static_cast<std::size_t>(std::distance(batches_.begin(), it)) - 1;
  return {index, row - batches_[index].first_row};
}

std::unique_ptr<ArrayView> IpcFileReader::build_view(const Batch& batch, const Field& field, std::size_t& node,
                                                     std::size_t& buffer, std::uint64_t& bytes) const {
  const auto body = file_.bytes().subspan(batch.body_offset, batch.body_length);
  const auto take = [&]() {
    const auto& ref = batch.buffers.at(buffer++);
    bytes += static_cast<std::uint64_t>(ref.length);
    return body.subspan(static_cast<std::size_t>(ref.offset), static_cast<std::size_t>(ref.length));
  };
  const NodeRef n = batch.nodes.at(node++);
  ArrayView::Buffers buffers;
  buffers.validity = take();
  std::unique_ptr<ArrayView> child;
  switch (field.type.id) {
    case TypeId::utf8:
    case TypeId::binary:
      buffers.offsets = take();
      buffers.values = take();
      break;
    case TypeId::list:
      buffers.offsets = take();
      child = build_view(batch, *field.type.child, node, buffer, bytes);
      break;
    default: buffers.values = take(); break;
  }
  try {
    return std::make_unique<ArrayView>(field, n.length, n.null_count, buffers, std::move(child));
  } catch (const Error& e) {
    corrupt(path_, e.what());
  }
}

ArrayView IpcFileReader::column(std::size_t batch, std::size_t column) const {
  if (batch >= batches_.size() || column >= schema_.fields.size()) {
    throw Error(ErrorCode::invalid_argument, "column access out of range in " + path_.string());
  }
  auto [node, buffer] = column_start_[column];
  std::uint64_t bytes = 0;
  auto view = build_view(batches_[batch], schema_.fields[column], node, buffer, bytes);
  if (view->length() != batches_[batch].length) {
    corrupt(path_, "column '" + schema_.fields[column].name + "' length differs from batch length");
  }
  counters_.column_reads += 1;
  counters_.body_bytes += bytes;
  global_io_counters().column_reads += 1;
  global_io_counters().body_bytes += bytes;
  return std::move(*view);
}

ArrayView IpcFileReader::column(std::size_t batch, std::string_view name) const {
  const auto index = schema_.field_index(name);
  if (!index) {
    corrupt(path_, "missing column '" + std::string(name) + "'");
  }
  return column(batch, *index);
}

}  // namespace d123::ipc
