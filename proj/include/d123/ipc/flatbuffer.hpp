#pragma once

// Minimal FlatBuffers encoder/decoder covering the subset of the wire format
// used by Arrow IPC metadata: tables with scalar and offset fields, strings,
// vectors of inline structs/scalars and vectors of tables.
//
// The encoder writes front-to-back: every vtable precedes its table and every
// child object follows the field that references it, so all uoffsets are
// forward as the format requires.

#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace d123::ipc::fb {

class Node {
 public:
  enum class Kind { table, string, inline_vector, offset_vector };

  static Node table();
  static Node string(std::string_view value);
  /// `bytes` holds `count` packed elements, each aligned to `align`.
  static Node inline_vector(std::vector<std::uint8_t> bytes, std::uint32_t count, std::uint32_t align);
  static Node offset_vector(std::vector<Node> items);

  template <class T>
  Node& scalar(int slot, T value) {
    std::vector<std::uint8_t> raw(sizeof(T));
    std::memcpy(raw.data(), &value, sizeof(T));
    slots_.push_back(Slot{slot, std::move(raw), {}});
    return *this;
  }
  Node& child(int slot, Node value);

 private:
  friend class Encoder;
  struct Slot {
    int index;
    std::vector<std::uint8_t> scalar;  // empty for offset slots
    std::vector<Node> child;           // exactly one for offset slots
  };

  Kind kind_ = Kind::table;
  std::vector<Slot> slots_;
  std::vector<std::uint8_t> bytes_;
  std::uint32_t count_ = 0;
  std::uint32_t align_ = 1;
  std::vector<Node> items_;
};

/// Serializes `root` into a finished buffer (root uoffset first). The result
/// length is a multiple of 8.
std::vector<std::uint8_t> encode(const Node& root);

class VectorView;

/// Bounds-checked read access to one table inside a buffer. Malformed input
/// raises Error(CorruptFile).
class TableView {
 public:
  TableView(std::span<const std::uint8_t> buffer, std::size_t position);

  static TableView root(std::span<const std::uint8_t> buffer);

  bool has(int slot) const { return field_position(slot).has_value(); }

  template <class T>
  T scalar(int slot, T fallback) const {
    const auto pos = field_position(slot);
    if (!pos) {
      return fallback;
    }
    check(*pos, sizeof(T));
    T out;
    std::memcpy(&out, buffer_.data() + *pos, sizeof(T));
    return out;
  }

  std::optional<TableView> table(int slot) const;
  std::optional<std::string_view> string(int slot) const;
  std::optional<VectorView> vector(int slot) const;

 private:
  friend class VectorView;
  std::optional<std::size_t> field_position(int slot) const;
  std::size_t follow(std::size_t position) const;
  void check(std::size_t position, std::size_t length) const;

  std::span<const std::uint8_t> buffer_;
  std::size_t position_;
  std::size_t vtable_;
  std::uint16_t vtable_size_;
};

class VectorView {
 public:
  VectorView(std::span<const std::uint8_t> buffer, std::size_t length_position);

  std::uint32_t size() const { return count_; }

  /// Raw bytes of element `i` for vectors of inline structs/scalars.
  std::span<const std::uint8_t> element(std::uint32_t i, std::size_t element_size) const;
  TableView table(std::uint32_t i) const;
  std::string_view string(std::uint32_t i) const;

 private:
  std::span<const std::uint8_t> buffer_;
  std::size_t data_;
  std::uint32_t count_;
};

std::string_view read_string_at(std::span<const std::uint8_t> buffer, std::size_t position);

}  // namespace d123::ipc::fb
