#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace d123::ipc {

enum class TypeId : std::uint8_t { uint8, int32, int64, float64, utf8, binary, list };

struct Field;

/// Column type. Lists carry exactly one child field.
struct DataType {
  TypeId id = TypeId::int64;
  std::shared_ptr<const Field> child;

  static DataType uint8() { return {TypeId::uint8, nullptr}; }
  static DataType int32() { return {TypeId::int32, nullptr}; }
  static DataType int64() { return {TypeId::int64, nullptr}; }
  static DataType float64() { return {TypeId::float64, nullptr}; }
  static DataType utf8() { return {TypeId::utf8, nullptr}; }
  static DataType binary() { return {TypeId::binary, nullptr}; }
  static DataType list_of(DataType value, bool value_nullable = false);

  /// Fixed element width in bytes, 0 for variable-width and list types.
  std::size_t byte_width() const;
  bool operator==(const DataType& other) const;
};

struct Field {
  std::string name;
  DataType type;
  bool nullable = false;

  bool operator==(const Field& other) const = default;
};

struct Schema {
  std::vector<Field> fields;
  std::vector<std::pair<std::string, std::string>> metadata;

  std::optional<std::size_t> field_index(std::string_view name) const;
  std::optional<std::string> metadata_value(std::string_view key) const;
};

/// Accumulates one column of one record batch for the writer.
class ColumnBuilder {
 public:
  explicit ColumnBuilder(const Field& field);

  void append_null();
  void append_u8(std::uint8_t v) { append_fixed(TypeId::uint8, &v, 1); }
  void append_i32(std::int32_t v) { append_fixed(TypeId::int32, &v, 4); }
  void append_i64(std::int64_t v) { append_fixed(TypeId::int64, &v, 8); }
  void append_f64(double v) { append_fixed(TypeId::float64, &v, 8); }
  void append_string(std::string_view v);
  void append_binary(std::span<const std::uint8_t> v);

  /// List columns: append values to child(), then close the entry.
  ColumnBuilder& child() { return *child_; }
  void finish_list_entry();

  const Field& field() const { return field_; }
  std::int64_t length() const { return length_; }
  std::int64_t null_count() const { return null_count_; }
  const std::vector<std::uint8_t>& validity() const { return validity_; }
  const std::vector<std::uint8_t>& values() const { return values_; }
  const std::vector<std::int32_t>& offsets() const { return offsets_; }
  const ColumnBuilder* child_builder() const { return child_.get(); }

 private:
  void append_fixed(TypeId expected, const void* data, std::size_t size);
  void mark_valid(bool valid);
  void expect(TypeId expected) const;

  Field field_;
  std::int64_t length_ = 0;
  std::int64_t null_count_ = 0;
  std::vector<std::uint8_t> validity_;
  std::vector<std::uint8_t> values_;
  std::vector<std::int32_t> offsets_;
  std::unique_ptr<ColumnBuilder> child_;
};

/// Zero-copy view of one column of one record batch inside a mapped file.
class ArrayView {
 public:
  struct Buffers {
    std::span<const std::uint8_t> validity;
    std::span<const std::uint8_t> values;
    std::span<const std::uint8_t> offsets;
  };

  ArrayView(const Field& field, std::int64_t length, std::int64_t null_count, Buffers buffers,
            std::unique_ptr<ArrayView> child);

  const Field& field() const { return *field_; }
  std::int64_t length() const { return length_; }
  std::int64_t null_count() const { return null_count_; }

  bool is_null(std::int64_t i) const;

  template <class T>
  T value(std::int64_t i) const {
    T out;
    std::memcpy(&out, buffers_.values.data() + static_cast<std::size_t>(i) * sizeof(T), sizeof(T));
    return out;
  }
  std::int64_t i64(std::int64_t i) const { return value<std::int64_t>(i); }
  double f64(std::int64_t i) const { return value<double>(i); }
  std::uint8_t u8(std::int64_t i) const { return buffers_.values[static_cast<std::size_t>(i)]; }
  std::int32_t i32(std::int64_t i) const { return value<std::int32_t>(i); }
  std::string_view string(std::int64_t i) const;
  std::span<const std::uint8_t> binary(std::int64_t i) const;
  /// Half-open range of child indices for list entry i.
  std::pair<std::int64_t, std::int64_t> list_range(std::int64_t i) const;
  const ArrayView& child() const { return *child_; }

  const Buffers& buffers() const { return buffers_; }

 private:
  std::int32_t offset(std::int64_t i) const;

  const Field* field_;
  std::int64_t length_;
  std::int64_t null_count_;
  Buffers buffers_;
  std::unique_ptr<ArrayView> child_;
};

}  // namespace d123::ipc
