#include "d123/map/str_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "d123/error.hpp"

namespace d123 {

namespace {

// STR packing of `rects` into groups of at most `cap`; returns the visiting
// order and the group sizes.
std::vector<std::uint32_t> str_order(const std::vector<Rect>& rects, std::size_t cap, std::vector<std::uint32_t>& sizes) {
  const std::size_t n = rects.size();
  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0u);
  auto by = [&](int axis) {
    return [&, axis](std::uint32_t a, std::uint32_t b) {
      const double ca = axis == 0 ? rects[a].min_x + rects[a].max_x : rects[a].min_y + rects[a].max_y;
      const double cb = axis == 0 ? rects[b].min_x + rects[b].max_x : rects[b].min_y + rects[b].max_y;
      return ca < cb || (ca == cb && a < b);
    };
  };
  std::sort(idx.begin(), idx.end(), by(0));
  const std::size_t leaves = (n + cap - 1) / cap;
  const auto slices = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(leaves))));
  const std::size_t slice_size = slices * cap;
  for (std::size_t s = 0; s < n; s += slice_size) {
    const auto begin = idx.begin() + static_cast<long>(s);
    const auto end = idx.begin() + static_cast<long>(std::min(n, s + slice_size));
    std::sort(begin, end, by(1));
    for (std::size_t g = s; g < std::min(n, s + slice_size); g += cap) {
      sizes.push_back(static_cast<std::uint32_t>(std::min(cap, std::min(n, s + slice_size) - g)));
    }
  }
  return idx;
}

std::size_t expected_height(std::size_t n, std::size_t cap) {
  std::size_t h = 1;
  for (std::size_t reach = cap; reach < n; reach *= cap) ++h;
  return h;
}

}  // namespace

StrTree::StrTree(const std::vector<Rect>& rects, std::size_t node_capacity)
    : capacity_(node_capacity), entry_rects_(rects) {
  if (capacity_ < 2) throw Error(ErrorCode::invalid_argument, "STR node capacity must be at least 2");
  for (const auto& r : rects) {
    if (r.empty() || !std::isfinite(r.min_x) || !std::isfinite(r.max_x) || !std::isfinite(r.min_y) ||
        !std::isfinite(r.max_y)) {
      throw Error(ErrorCode::invalid_argument, "STR entry without a finite rectangle");
    }
  }
  if (rects.empty()) return;

  std::vector<std::uint32_t> sizes;
  order_ = str_order(rects, capacity_, sizes);
  std::vector<Node> level;
  std::uint32_t pos = 0;
  for (const auto s : sizes) {
    Node node{{}, pos, s};
    for (std::uint32_t k = pos; k < pos + s; ++k) node.rect.expand(rects[order_[k]]);
    level.push_back(node);
    pos += s;
  }
  while (level.size() > 1) {
    std::vector<Rect> node_rects;
    for (const auto& nd : level) node_rects.push_back(nd.rect);
    std::vector<std::uint32_t> group_sizes;
    const auto perm = str_order(node_rects, capacity_, group_sizes);
    std::vector<Node> reordered;
    for (const auto i : perm) reordered.push_back(level[i]);
    std::vector<Node> parents;
    std::uint32_t at = 0;
    for (const auto s : group_sizes) {
      Node parent{{}, at, s};
      for (std::uint32_t k = at; k < at + s; ++k) parent.rect.expand(reordered[k].rect);
      parents.push_back(parent);
      at += s;
    }
    levels_.push_back(std::move(reordered));
    level = std::move(parents);
  }
  levels_.push_back(std::move(level));
}

void StrTree::query(const Rect& q, std::vector<std::uint32_t>& out) const {
  if (levels_.empty() || !root_rect().intersects(q)) return;
  struct Item {
    std::size_t level;
    std::uint32_t node;
  };
  std::vector<Item> stack{{levels_.size() - 1, 0}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const Node& nd = levels_[it.level][it.node];
    if (it.level == 0) {
      for (std::uint32_t k = nd.first; k < nd.first + nd.count; ++k) {
        if (entry_rects_[order_[k]].intersects(q)) out.push_back(order_[k]);
      }
      continue;
    }
    for (std::uint32_t c = nd.first; c < nd.first + nd.count; ++c) {
      if (levels_[it.level - 1][c].rect.intersects(q)) stack.push_back({it.level - 1, c});
    }
  }
}

std::string StrTree::check_invariants() const {
  const std::size_t n = entry_rects_.size();
  if (n == 0) return levels_.empty() ? "" : "empty tree has nodes";
  if (levels_.back().size() != 1) return "more than one root";
  if (height() != expected_height(n, capacity_)) {
    return "height " + std::to_string(height()) + " != " + std::to_string(expected_height(n, capacity_));
  }
  std::vector<int> seen(n, 0);
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    const std::size_t below = l == 0 ? n : levels_[l - 1].size();
    std::vector<int> owned(below, 0);
    std::size_t covered = 0;
    for (const auto& nd : levels_[l]) {
      if (nd.count == 0 || nd.count > capacity_) return "node fan-out out of range";
      if (nd.first + nd.count > below) return "child range out of bounds";
      for (std::uint32_t k = nd.first; k < nd.first + nd.count; ++k) {
        if (owned[k]++) return "child shared by two parents";
      }
      covered += nd.count;
      for (std::uint32_t k = nd.first; k < nd.first + nd.count; ++k) {
        const Rect& child = l == 0 ? entry_rects_[order_.at(k)] : levels_[l - 1].at(k).rect;
        if (!nd.rect.contains(child)) return "child rectangle escapes its parent";
        if (l == 0) ++seen[order_[k]];
      }
    }
    if (covered != below) return "level does not partition its children";
  }
  for (const int s : seen) {
    if (s != 1) return "entry not in exactly one leaf";
  }
  return {};
}

}  // namespace d123
