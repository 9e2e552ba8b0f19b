#include "pcsimp/knn.hpp"

#include <algorithm>
#include <numeric>

#include "pcsimp/error.hpp"

namespace pcs {

namespace {

double box_distance2(const Vec3& q, const Vec3& lo, const Vec3& hi) {
  double d2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    double d = 0.0;
    if (q[a] < lo[a]) {
      d = lo[a] - q[a];
    } else if (q[a] > hi[a]) {
      d = q[a] - hi[a];
    }
    d2 += d * d;
  }
  return d2;
}

}  // namespace

KdTree::KdTree(std::span<const Vec3> points, std::size_t leaf_size)
    : points_(points.begin(), points.end()), leaf_size_(std::max<std::size_t>(leaf_size, 1)) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), Index{0});
  if (!points_.empty()) {
    nodes_.reserve(2 * points_.size() / leaf_size_ + 2);
    build(0, static_cast<std::uint32_t>(points_.size()));
  }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = node.hi = points_[order_[begin]];
  for (std::uint32_t i = begin; i < end; ++i) {
    node.lo = node.lo.cwiseMin(points_[order_[i]]);
    node.hi = node.hi.cwiseMax(points_[order_[i]]);
  }
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= leaf_size_) return id;

  int axis = 0;
  (node.hi - node.lo).maxCoeff(&axis);
  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](Index a, Index b) {
                     const double ca = points_[a][axis];
                     const double cb = points_[b][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const std::int32_t left = build(begin, mid);
  const std::int32_t right = build(mid, end);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

void KdTree::search(std::int32_t id, const Vec3& q, std::size_t k, Index exclude,
                    std::vector<Neighbor>& heap) const {
  const Node& node = nodes_[id];
  if (heap.size() == k && box_distance2(q, node.lo, node.hi) > heap.front().dist2) return;

  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const Index idx = order_[i];
      if (idx == exclude) continue;
      const Neighbor cand{(points_[idx] - q).squaredNorm(), idx};
      if (heap.size() < k) {
        heap.push_back(cand);
        std::push_heap(heap.begin(), heap.end());
      } else if (cand < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = cand;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }

  const Node& l = nodes_[node.left];
  const Node& r = nodes_[node.right];
  const double dl = box_distance2(q, l.lo, l.hi);
  const double dr = box_distance2(q, r.lo, r.hi);
  if (dl <= dr) {
    search(node.left, q, k, exclude, heap);
    search(node.right, q, k, exclude, heap);
  } else {
    search(node.right, q, k, exclude, heap);
    search(node.left, q, k, exclude, heap);
  }
}

void KdTree::knn(const Vec3& query, std::size_t k, Index exclude,
                 std::vector<Neighbor>& out) const {
  out.clear();
  if (k == 0 || nodes_.empty()) return;
  out.reserve(k);
  search(0, query, k, exclude, out);
  std::sort_heap(out.begin(), out.end());
}

std::vector<Neighbor> KdTree::knn(const Vec3& query, std::size_t k, Index exclude) const {
  std::vector<Neighbor> out;
  knn(query, k, exclude, out);
  return out;
}

Neighbor KdTree::nearest(const Vec3& query) const {
  if (nodes_.empty()) throw Error(ErrorCode::EmptyCloud, "nearest-neighbor query on empty tree");
  std::vector<Neighbor> out;
  knn(query, 1, npos, out);
  return out.front();
}

NeighborGraph build_knn(std::span<const Vec3> points, std::size_t k) {
  if (points.size() < 2) throw Error(ErrorCode::EmptyCloud, "k-NN needs at least 2 points");
  if (k == 0) throw Error(ErrorCode::BadParams, "k must be at least 1");

  const std::size_t n = points.size();
  const std::size_t kk = std::min(k, n - 1);
  NeighborGraph graph;
  graph.k = k;
  graph.offsets.resize(n + 1);
  graph.indices.resize(n * kk);

  const KdTree tree(points);
  std::vector<Neighbor> found;
  for (std::size_t i = 0; i < n; ++i) {
    tree.knn(points[i], kk, static_cast<Index>(i), found);
    graph.offsets[i] = i * kk;
    for (std::size_t j = 0; j < kk; ++j) {
      graph.indices[i * kk + j] = found[j].index;
      if (found[j].dist2 == 0.0) ++graph.duplicate_pairs;
    }
  }
  graph.offsets[n] = n * kk;
  return graph;
}

NeighborGraph mesh_neighbors(const Mesh& mesh) {
  mesh.validate();
  const std::size_t n = mesh.positions.size();
  std::vector<std::vector<Index>> ring(n);
  for (const Face& f : mesh.faces) {
    for (int e = 0; e < 3; ++e) {
      const Index a = f[e];
      const Index b = f[(e + 1) % 3];
      ring[a].push_back(b);
      ring[b].push_back(a);
    }
  }
  NeighborGraph graph;
  graph.offsets.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = ring[i];
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
    graph.offsets[i + 1] = graph.offsets[i] + r.size();
    graph.indices.insert(graph.indices.end(), r.begin(), r.end());
  }
  return graph;
}

std::vector<Index> nearest_indices(std::span<const Vec3> queries, const KdTree& tree) {
  std::vector<Index> out(queries.size());
  std::vector<Neighbor> found;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    tree.knn(queries[i], 1, KdTree::npos, found);
    if (found.empty()) throw Error(ErrorCode::EmptyCloud, "nearest-neighbor query on empty set");
    out[i] = found.front().index;
  }
  return out;
}

}  // namespace pcs
