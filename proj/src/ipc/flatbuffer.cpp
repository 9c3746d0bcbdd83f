#include "d123/ipc/flatbuffer.hpp"

#include <algorithm>

#include "d123/error.hpp"

namespace d123::ipc::fb {

namespace {

[[noreturn]] void corrupt(const std::string& what) {
  throw Error(ErrorCode::corrupt_file, "flatbuffer: " + what);
}

template <class T>
T load(std::span<const std::uint8_t> buffer, std::size_t position) {
  if (position > buffer.size() || buffer.size() - position < sizeof(T)) {
    corrupt("read past end of buffer");
  }
  T out;
  std::memcpy(&out, buffer.data() + position, sizeof(T));
  return out;
}

}  // namespace

Node Node::table() { return Node{}; }

Node Node::string(std::string_view value) {
  Node n;
  n.kind_ = Kind::string;
  n.bytes_.assign(value.begin(), value.end());
  return n;
}

Node Node::inline_vector(std::vector<std::uint8_t> bytes, std::uint32_t count, std::uint32_t align) {
  Node n;
  n.kind_ = Kind::inline_vector;
  n.bytes_ = std::move(bytes);
  n.count_ = count;
  n.align_ = std::max<std::uint32_t>(align, 1);
  return n;
}

Node Node::offset_vector(std::vector<Node> items) {
  Node n;
  n.kind_ = Kind::offset_vector;
  n.items_ = std::move(items);
  return n;
}

Node& Node::child(int slot, Node value) {
  Slot s{slot, {}, {}};
  s.child.push_back(std::move(value));
  slots_.push_back(std::move(s));
  return *this;
}

class Encoder {
 public:
  std::vector<std::uint8_t> run(const Node& root) {
    put<std::uint32_t>(0);
    const std::size_t root_pos = write(root);
    patch(0, static_cast<std::uint32_t>(root_pos));
    pad_to(8);
    return std::move(buf_);
  }

 private:
  template <class T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void patch(std::size_t at, std::uint32_t value) { std::memcpy(buf_.data() + at, &value, sizeof(value)); }
  void pad_to(std::size_t align) {
    while (buf_.size() % align != 0) {
      buf_.push_back(0);
    }
  }

  std::size_t write(const Node& n) {
    switch (n.kind_) {
      case Node::Kind::table: return write_table(n);
      case Node::Kind::string: return write_string(n);
      case Node::Kind::inline_vector: return write_inline_vector(n);
      case Node::Kind::offset_vector: return write_offset_vector(n);
    }
    return 0;
  }

  std::size_t write_string(const Node& n) {
    pad_to(4);
    const std::size_t pos = buf_.size();
    put<std::uint32_t>(static_cast<std::uint32_t>(n.bytes_.size()));
    buf_.insert(buf_.end(), n.bytes_.begin(), n.bytes_.end());
    buf_.push_back(0);
    return pos;
  }

  std::size_t write_inline_vector(const Node& n) {
    pad_to(4);
    while ((buf_.size() + 4) % n.align_ != 0) {
      buf_.push_back(0);
    }
    const std::size_t pos = buf_.size();
    put<std::uint32_t>(n.count_);
    buf_.insert(buf_.end(), n.bytes_.begin(), n.bytes_.end());
    return pos;
  }

  std::size_t write_offset_vector(const Node& n) {
    pad_to(4);
    const std::size_t pos = buf_.size();
    put<std::uint32_t>(static_cast<std::uint32_t>(n.items_.size()));
    const std::size_t first = buf_.size();
    for (std::size_t i = 0; i < n.items_.size(); ++i) {
      put<std::uint32_t>(0);
    }
    for (std::size_t i = 0; i < n.items_.size(); ++i) {
      const std::size_t at = first + 4 * i;
      const std::size_t child = write(n.items_[i]);
      patch(at, static_cast<std::uint32_t>(child - at));
    }
    return pos;
  }

  std::size_t write_table(const Node& n) {
    struct Placed {
      const Node::Slot* slot;
      std::size_t size;
      std::size_t offset;
    };
    std::vector<Placed> placed;
    int max_slot = -1;
    for (const auto& s : n.slots_) {
      const std::size_t size = s.child.empty() ? s.scalar.size() : 4;
      placed.push_back({&s, size, 0});
      max_slot = std::max(max_slot, s.index);
    }
    std::stable_sort(placed.begin(), placed.end(), [](const Placed& a, const Placed& b) { return a.size > b.size; });
    std::size_t cursor = 4;  // soffset to vtable
    for (auto& p : placed) {
      cursor = (cursor + p.size - 1) / p.size * p.size;
      p.offset = cursor;
      cursor += p.size;
    }
    const std::size_t table_size = (cursor + 3) / 4 * 4;

    pad_to(2);
    const std::size_t vtable_pos = buf_.size();
    const std::size_t slot_count = static_cast<std::size_t>(max_slot + 1);
    put<std::uint16_t>(static_cast<std::uint16_t>(4 + 2 * slot_count));
    put<std::uint16_t>(static_cast<std::uint16_t>(table_size));
    std::vector<std::uint16_t> offsets(slot_count, 0);
    for (const auto& p : placed) {
      offsets[static_cast<std::size_t>(p.slot->index)] = static_cast<std::uint16_t>(p.offset);
    }
    for (auto o : offsets) {
      put<std::uint16_t>(o);
    }

    pad_to(8);
    const std::size_t table_pos = buf_.size();
    buf_.resize(table_pos + table_size, 0);
    const auto soffset = static_cast<std::int32_t>(table_pos - vtable_pos);
    std::memcpy(buf_.data() + table_pos, &soffset, 4);
    for (const auto& p : placed) {
      if (p.slot->child.empty()) {
        std::memcpy(buf_.data() + table_pos + p.offset, p.slot->scalar.data(), p.size);
      }
    }
    for (const auto& p : placed) {
      if (!p.slot->child.empty()) {
        const std::size_t at = table_pos + p.offset;
        const std::size_t child = write(p.slot->child.front());
        patch(at, static_cast<std::uint32_t>(child - at));
      }
    }
    return table_pos;
  }

  std::vector<std::uint8_t> buf_;
};

std::vector<std::uint8_t> encode(const Node& root) { return Encoder{}.run(root); }

TableView::TableView(std::span<const std::uint8_t> buffer, std::size_t position) : buffer_(buffer), position_(position) {
  if (position % 4 != 0) {
    corrupt("misaligned table");
  }
  const auto soffset = load<std::int32_t>(buffer_, position_);
  const auto vt = static_cast<std::int64_t>(position_) - soffset;
  if (vt < 0 || static_cast<std::size_t>(vt) + 4 > buffer_.size()) {
    corrupt("vtable out of range");
  }
  vtable_ = static_cast<std::size_t>(vt);
  vtable_size_ = load<std::uint16_t>(buffer_, vtable_);
  if (vtable_size_ < 4 || vtable_size_ % 2 != 0 || vtable_ + vtable_size_ > buffer_.size()) {
    corrupt("bad vtable size");
  }
}

TableView TableView::root(std::span<const std::uint8_t> buffer) {
  return TableView(buffer, load<std::uint32_t>(buffer, 0));
}

std::optional<std::size_t> TableView::field_position(int slot) const {
  const std::size_t entry = 4 + 2 * static_cast<std::size_t>(slot);
  if (entry + 2 > vtable_size_) {
    return std::nullopt;
  }
  const auto offset = load<std::uint16_t>(buffer_, vtable_ + entry);
  if (offset == 0) {
    return std::nullopt;
  }
  return position_ + offset;
}

std::size_t TableView::follow(std::size_t position) const {
  const auto rel = load<std::uint32_t>(buffer_, position);
  const std::size_t target = position + rel;
  if (target >= buffer_.size()) {
    corrupt("offset out of range");
  }
  return target;
}

void TableView::check(std::size_t position, std::size_t length) const {
  if (position > buffer_.size() || buffer_.size() - position < length) {
    corrupt("field out of range");
  }
}

std::optional<TableView> TableView::table(int slot) const {
  const auto pos = field_position(slot);
  if (!pos) {
    return std::nullopt;
  }
  return TableView(buffer_, follow(*pos));
}

std::optional<std::string_view> TableView::string(int slot) const {
  const auto pos = field_position(slot);
  if (!pos) {
    return std::nullopt;
  }
  return read_string_at(buffer_, follow(*pos));
}

std::optional<VectorView> TableView::vector(int slot) const {
  const auto pos = field_position(slot);
  if (!pos) {
    return std::nullopt;
  }
  return VectorView(buffer_, follow(*pos));
}

std::string_view read_string_at(std::span<const std::uint8_t> buffer, std::size_t position) {
  const auto length = load<std::uint32_t>(buffer, position);
  if (buffer.size() - position - 4 < length) {
    corrupt("string out of range");
  }
  return {reinterpret_cast<const char*>(buffer.data() + position + 4), length};
}

VectorView::VectorView(std::span<const std::uint8_t> buffer, std::size_t length_position)
    : buffer_(buffer), data_(length_position + 4), count_(load<std::uint32_t>(buffer, length_position)) {}

std::span<const std::uint8_t> VectorView::element(std::uint32_t i, std::size_t element_size) const {
  if (i >= count_) {
    corrupt("vector index out of range");
  }
  const std::size_t pos = data_ + i * element_size;
  if (pos > buffer_.size() || buffer_.size() - pos < element_size) {
    corrupt("vector element out of range");
  }
  return buffer_.subspan(pos, element_size);
}

TableView VectorView::table(std::uint32_t i) const {
  element(i, 4);
  const std::size_t at = data_ + 4 * static_cast<std::size_t>(i);
  return TableView(buffer_, at + load<std::uint32_t>(buffer_, at));
}

std::string_view VectorView::string(std::uint32_t i) const {
  element(i, 4);
  const std::size_t at = data_ + 4 * static_cast<std::size_t>(i);
  return read_string_at(buffer_, at + load<std::uint32_t>(buffer_, at));
}

}  // namespace d123::ipc::fb
