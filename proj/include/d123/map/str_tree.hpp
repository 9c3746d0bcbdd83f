#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "d123/map/geometry.hpp"

namespace d123 {

/// Packed R-tree built by Sort-Tile-Recursive bulk loading. Entries are
/// identified by their position in the input; ties in the sort order fall
/// back to that position, so the tree is deterministic for a given input.
class StrTree {
 public:
  struct Node {
    Rect rect;
    std::uint32_t first = 0;  // into the level below, or into entry_order() for leaves
    std::uint32_t count = 0;
  };

  StrTree() = default;
  explicit StrTree(const std::vector<Rect>& rects, std::size_t node_capacity = 10);

  std::size_t size() const { return entry_rects_.size(); }
  std::size_t node_capacity() const { return capacity_; }
  /// Node levels, leaves first; the last level holds the root.
  const std::vector<std::vector<Node>>& levels() const { return levels_; }
  std::size_t height() const { return levels_.size(); }
  Rect root_rect() const { return levels_.empty() ? Rect{} : levels_.back().front().rect; }
  const std::vector<std::uint32_t>& entry_order() const { return order_; }

  /// Appends entries whose rectangle intersects `query` (unordered).
  void query(const Rect& query, std::vector<std::uint32_t>& out) const;

  /// Empty string when parent containment, leaf partition and height hold.
  std::string check_invariants() const;

 private:
  std::size_t capacity_ = 10;
  std::vector<Rect> entry_rects_;
  std::vector<std::uint32_t> order_;
  std::vector<std::vector<Node>> levels_;
};

}  // namespace d123
