#include "d123/ipc/column.hpp"

#include <limits>

#include "d123/error.hpp"

namespace d123::ipc {

DataType DataType::list_of(DataType value, bool value_nullable) {
  return {TypeId::list, std::make_shared<const Field>(Field{"item", std::move(value), value_nullable})};
}

std::size_t DataType::byte_width() const {
  switch (id) {
    case TypeId::uint8: return 1;
    case TypeId::int32: return 4;
    case TypeId::int64:
    case TypeId::float64: return 8;
    default: return 0;
  }
}

bool DataType::operator==(const DataType& other) const {
  if (id != other.id) {
    return false;
  }
  if (id != TypeId::list) {
    return true;
  }
  return child && other.child && *child == *other.child;
}

std::optional<std::size_t> Schema::field_index(std::string_view name) const {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (fields[i].name == name) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<std::string> Schema::metadata_value(std::string_view key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) {
      return v;
    }
  }
  return std::nullopt;
}

ColumnBuilder::ColumnBuilder(const Field& field) : field_(field) {
  if (field_.type.id == TypeId::utf8 || field_.type.id == TypeId::binary || field_.type.id == TypeId::list) {
    offsets_.push_back(0);
  }
  if (field_.type.id == TypeId::list) {
    child_ = std::make_unique<ColumnBuilder>(*field_.type.child);
  }
}

void ColumnBuilder::expect(TypeId expected) const {
  if (field_.type.id != expected) {
    throw Error(ErrorCode::invalid_argument, "column '" + field_.name + "' appended with the wrong type");
  }
}

void ColumnBuilder::mark_valid(bool valid) {
  const auto bit = static_cast<std::size_t>(length_);
  if (bit / 8 >= validity_.size()) {
    validity_.push_back(0);
  }
  if (valid) {
    validity_[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
  } else {
    ++null_count_;
  }
  ++length_;
}

void ColumnBuilder::append_fixed(TypeId expected, const void* data, std::size_t size) {
  expect(expected);
  const auto* p = static_cast<const std::uint8_t*>(data);
  values_.insert(values_.end(), p, p + size);
  mark_valid(true);
}

void ColumnBuilder::append_null() {
  if (!field_.nullable) {
    throw Error(ErrorCode::invalid_argument, "column '" + field_.name + "' is not nullable");
  }
  const std::size_t width = field_.type.byte_width();
  values_.insert(values_.end(), width, 0);
  if (!offsets_.empty()) {
    offsets_.push_back(offsets_.back());
  }
  mark_valid(false);
}

void ColumnBuilder::append_string(std::string_view v) {
  expect(TypeId::utf8);
  values_.insert(values_.end(), v.begin(), v.end());
  if (values_.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw Error(ErrorCode::invalid_argument, "column '" + field_.name + "' exceeds 2 GiB per batch");
  }
  offsets_.push_back(static_cast<std::int32_t>(values_.size()));
  mark_valid(true);
}

void ColumnBuilder::append_binary(std::span<const std::uint8_t> v) {
  expect(TypeId::binary);
  values_.insert(values_.end(), v.begin(), v.end());
  if (values_.size() > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max())) {
    throw Error(ErrorCode::invalid_argument, "column '" + field_.name + "' exceeds 2 GiB per batch");
  }
  offsets_.push_back(static_cast<std::int32_t>(values_.size()));
  mark_valid(true);
}

void ColumnBuilder::finish_list_entry() {
  expect(TypeId::list);
  offsets_.push_back(static_cast<std::int32_t>(child_->length()));
  mark_valid(true);
}

ArrayView::ArrayView(const Field& field, std::int64_t length, std::int64_t null_count, Buffers buffers,
                     std::unique_ptr<ArrayView> child)
    : field_(&field), length_(length), null_count_(null_count), buffers_(buffers), child_(std::move(child)) {
  const auto n = static_cast<std::size_t>(length);
  const auto fail = [&](const char* what) {
    throw Error(ErrorCode::corrupt_file, "column '" + field.name + "': " + what);
  };
  if (null_count > 0 && buffers.validity.size() < (n + 7) / 8) {
    fail("validity bitmap too short");
  }
  const std::size_t width = field.type.byte_width();
  if (width > 0 && buffers.values.size() < n * width) {
    fail("values buffer too short");
  }
  if (width == 0 && n > 0) {
    if (buffers.offsets.size() < (n + 1) * 4) {
      fail("offsets buffer too short");
    }
    const std::int32_t last = offset(length);
    if (last < 0 || offset(0) < 0 || offset(0) > last) {
      fail("offsets out of order");
    }
    if (field.type.id == TypeId::list) {
      if (!child_ || child_->length() < last) {
        fail("list child too short");
      }
    } else if (buffers.values.size() < static_cast<std::size_t>(last)) {
      fail("data buffer too short");
    }
  }
}

bool ArrayView::is_null(std::int64_t i) const {
  if (null_count_ == 0) {
    return false;
  }
  const auto bit = static_cast<std::size_t>(i);
  return (buffers_.validity[bit / 8] & (1u << (bit % 8))) == 0;
}

std::int32_t ArrayView::offset(std::int64_t i) const {
  std::int32_t out;
  std::memcpy(&out, buffers_.offsets.data() + static_cast<std::size_t>(i) * 4, 4);
  return out;
}

std::string_view ArrayView::string(std::int64_t i) const {
  const auto begin = offset(i);
  const auto end = offset(i + 1);
  if (begin < 0 || end < begin || static_cast<std::size_t>(end) > buffers_.values.size()) {
    throw Error(ErrorCode::corrupt_file, "column '" + field_->name + "': string offsets out of range");
  }
  return {reinterpret_cast<const char*>(buffers_.values.data()) + begin, static_cast<std::size_t>(end - begin)};
}

std::span<const std::uint8_t> ArrayView::binary(std::int64_t i) const {
  const auto s = string(i);
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::pair<std::int64_t, std::int64_t> ArrayView::list_range(std::int64_t i) const {
  const auto begin = offset(i);
  const auto end = offset(i + 1);
  if (begin < 0 || end < begin || end > child_->length()) {
    throw Error(ErrorCode::corrupt_file, "column '" + field_->name + "': list offsets out of range");
  }
  return {begin, end};
}

}  // namespace d123::ipc
