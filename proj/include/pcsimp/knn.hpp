#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pcsimp/geometry.hpp"

namespace pcs {

struct Neighbor {
  double dist2 = 0.0;
  Index index = 0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.dist2 < b.dist2 || (a.dist2 == b.dist2 && a.index < b.index);
  }
};

/// Static 3-d kd-tree answering exact k-nearest-neighbor queries.
///
/// Results are ordered by (squared distance, index), so equidistant points are
/// always reported lowest index first. Queries are const and thread-safe.
class KdTree {
 public:
  static constexpr Index npos = std::numeric_limits<Index>::max();

  explicit KdTree(std::span<const Vec3> points, std::size_t leaf_size = 12);

  std::size_t size() const { return points_.size(); }

  /// Up to k nearest points to `query`, skipping `exclude`.
  std::vector<Neighbor> knn(const Vec3& query, std::size_t k, Index exclude = npos) const;
  void knn(const Vec3& query, std::size_t k, Index exclude, std::vector<Neighbor>& out) const;

  Neighbor nearest(const Vec3& query) const;

 private:
  struct Node {
    Vec3 lo;
    Vec3 hi;
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end);
  void search(std::int32_t node, const Vec3& q, std::size_t k, Index exclude,
              std::vector<Neighbor>& heap) const;

  std::vector<Vec3> points_;
  std::vector<Index> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_;
};

/// Exact k-NN graph of a point set. Lists hold min(k, N-1) entries.
/// Throws EmptyCloud for fewer than 2 points and BadParams for k == 0.
NeighborGraph build_knn(std::span<const Vec3> points, std::size_t k);

/// 1-ring vertex adjacency of a triangle mesh (symmetric, sorted by index).
NeighborGraph mesh_neighbors(const Mesh& mesh);

/// Index of the nearest point of `tree` for every query.
std::vector<Index> nearest_indices(std::span<const Vec3> queries, const KdTree& tree);

}  // namespace pcs
