#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "stlgm/data_model.hpp"

namespace stlgm {

/// Ranking key for neighbor candidates: squared spatial distance first, then
/// temporal distance, then candidate index.
struct NeighborKey {
  double ds2 = 0.0;
  double dt = 0.0;
  std::size_t index = 0;

  friend bool operator<(const NeighborKey& a, const NeighborKey& b) {
    if (a.ds2 != b.ds2) return a.ds2 < b.ds2;
    if (a.dt != b.dt) return a.dt < b.dt;
    return a.index < b.index;
  }
};

NeighborKey neighbor_key(const SpaceTimeCoord& query, const SpaceTimeCoord& candidate,
                         std::size_t index);

/// Exact k-d tree over the (x, y) plane. Queries return the k best points by
/// NeighborKey among those whose index is below a limit, which is how the
/// Vecchia predecessor restriction is expressed.
class NeighborIndex {
 public:
  explicit NeighborIndex(std::span<const SpaceTimeCoord> points);

  /// Indices of the k best candidates with index < limit, best first.
  std::vector<std::size_t> nearest(const SpaceTimeCoord& query, std::size_t k,
                                   std::size_t limit) const;

 private:
  struct Node {
    std::size_t begin = 0, end = 0;  // range in perm_
    int left = -1, right = -1;
    double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
    std::size_t min_index = 0;
  };

  int build(std::size_t begin, std::size_t end);
  void search(int node, const SpaceTimeCoord& q, std::size_t k, std::size_t limit,
              std::vector<NeighborKey>& heap) const;

  std::vector<SpaceTimeCoord> points_;
  std::vector<std::size_t> perm_;
  std::vector<Node> nodes_;
};

/// O(n) scan with the same ranking; the reference the tree is tested against
/// and the path used for small inputs.
std::vector<std::size_t> nearest_brute_force(std::span<const SpaceTimeCoord> points,
                                             const SpaceTimeCoord& query, std::size_t k,
                                             std::size_t limit);

}  // namespace stlgm
