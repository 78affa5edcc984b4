#include "stlgm/neighbor_index.hpp"

#include <algorithm>
#include <cmath>

namespace stlgm {
namespace {

constexpr std::size_t kLeafSize = 16;

double box_distance2(double qx, double qy, double min_x, double max_x, double min_y, double max_y) {
  const double dx = qx < min_x ? min_x - qx : (qx > max_x ? qx - max_x : 0.0);
  const double dy = qy < min_y ? min_y - qy : (qy > max_y ? qy - max_y : 0.0);
  return dx * dx + dy * dy;
}

void offer(std::vector<NeighborKey>& heap, std::size_t k, const NeighborKey& key) {
  if (heap.size() < k) {
    heap.push_back(key);
    std::push_heap(heap.begin(), heap.end());
  } else if (key < heap.front()) {
    std::pop_heap(heap.begin(), heap.end());
    heap.back() = key;
    std::push_heap(heap.begin(), heap.end());
  }
}

std::vector<std::size_t> drain(std::vector<NeighborKey>& heap) {
  std::sort_heap(heap.begin(), heap.end());
  std::vector<std::size_t> out;
  out.reserve(heap.size());
  for (const auto& key : heap) out.push_back(key.index);
  return out;
}

}  // namespace

NeighborKey neighbor_key(const SpaceTimeCoord& query, const SpaceTimeCoord& candidate,
                         std::size_t index) {
  const double dx = query.x - candidate.x;
  const double dy = query.y - candidate.y;
  return {dx * dx + dy * dy, std::abs(query.t - candidate.t), index};
}

NeighborIndex::NeighborIndex(std::span<const SpaceTimeCoord> points)
    : points_(points.begin(), points.end()), perm_(points.size()) {
  for (std::size_t i = 0; i < perm_.size(); ++i) perm_[i] = i;
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / kLeafSize + 2);
    build(0, points_.size());
  }
}

int NeighborIndex::build(std::size_t begin, std::size_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.min_x = node.min_y = HUGE_VAL;
  node.max_x = node.max_y = -HUGE_VAL;
  node.min_index = perm_[begin];
  for (std::size_t i = begin; i < end; ++i) {
    const auto& p = points_[perm_[i]];
    node.min_x = std::min(node.min_x, p.x);
    node.max_x = std::max(node.max_x, p.x);
    node.min_y = std::min(node.min_y, p.y);
    node.max_y = std::max(node.max_y, p.y);
    node.min_index = std::min(node.min_index, perm_[i]);
  }
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  const bool split_x = (node.max_x - node.min_x) >= (node.max_y - node.min_y);
  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(perm_.begin() + static_cast<std::ptrdiff_t>(begin),
                   perm_.begin() + static_cast<std::ptrdiff_t>(mid),
                   perm_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     const double va = split_x ? points_[a].x : points_[a].y;
                     const double vb = split_x ? points_[b].x : points_[b].y;
                     return va < vb || (va == vb && a < b);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

void NeighborIndex::search(int id, const SpaceTimeCoord& q, std::size_t k, std::size_t limit,
                           std::vector<NeighborKey>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  if (node.min_index >= limit) return;
  if (heap.size() == k &&
      box_distance2(q.x, q.y, node.min_x, node.max_x, node.min_y, node.max_y) > heap.front().ds2) {
    return;
  }
  if (node.left < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t idx = perm_[i];
      if (idx < limit) offer(heap, k, neighbor_key(q, points_[idx], idx));
    }
    return;
  }
  const Node& l = nodes_[static_cast<std::size_t>(node.left)];
  const Node& r = nodes_[static_cast<std::size_t>(node.right)];
  const double dl = box_distance2(q.x, q.y, l.min_x, l.max_x, l.min_y, l.max_y);
  const double dr = box_distance2(q.x, q.y, r.min_x, r.max_x, r.min_y, r.max_y);
  if (dl <= dr) {
    search(node.left, q, k, limit, heap);
    search(node.right, q, k, limit, heap);
  } else {
    search(node.right, q, k, limit, heap);
    search(node.left, q, k, limit, heap);
  }
}

std::vector<std::size_t> NeighborIndex::nearest(const SpaceTimeCoord& query, std::size_t k,
                                                std::size_t limit) const {
  limit = std::min(limit, points_.size());
  std::vector<NeighborKey> heap;
  if (k == 0 || limit == 0) return {};
  heap.reserve(k + 1);
  search(0, query, k, limit, heap);
  return drain(heap);
}

std::vector<std::size_t> nearest_brute_force(std::span<const SpaceTimeCoord> points,
                                             const SpaceTimeCoord& query, std::size_t k,
                                             std::size_t limit) {
  limit = std::min(limit, points.size());
  std::vector<NeighborKey> heap;
  if (k == 0) return {};
  heap.reserve(k + 1);
  for (std::size_t j = 0; j < limit; ++j) offer(heap, k, neighbor_key(query, points[j], j));
  return drain(heap);
}

}  // namespace stlgm
