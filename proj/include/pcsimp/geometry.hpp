#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace pcs {

using Vec3 = Eigen::Vector3d;
using Positions = std::vector<Vec3>;
using Index = std::uint32_t;
using Face = std::array<Index, 3>;

/// Compressed adjacency: neighbors of point i are indices[offsets[i] .. offsets[i+1]).
///
/// A k-NN graph stores each list sorted ascending by (distance, index) and never
/// lists a point as its own neighbor. Mesh 1-ring adjacency uses k == 0 and
/// sorts each list by index.
struct NeighborGraph {
  std::size_t k = 0;
  std::vector<std::size_t> offsets{0};
  std::vector<Index> indices;
  /// Number of (i, j) neighbor pairs with identical positions found during the build.
  std::size_t duplicate_pairs = 0;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const Index> neighbors(std::size_t i) const {
    return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
};

/// How the Gaussian bandwidth h of the mean-curvature average is chosen.
struct BandwidthPolicy {
  enum class Kind { KthNeighbor, Global };
  Kind kind = Kind::KthNeighbor;
  /// Only used by Kind::Global.
  double global_h = 1.0;
};

/// Per-point covariance analysis of a cloud.
struct SurfaceDescriptors {
  std::vector<Vec3> eigenvalues;  // ascending per point
  std::vector<Vec3> normals;
  std::vector<double> curvature;
  std::vector<double> mean_curvature;
  std::vector<double> roughness;
  std::vector<double> bandwidth;  // h per point
  std::vector<std::uint8_t> degenerate;
  NeighborGraph graph;
  BandwidthPolicy policy;

  std::size_t size() const { return curvature.size(); }
  std::size_t degenerate_count() const;
};

struct PointCloud {
  Positions positions;
  std::vector<Vec3> normals;  // empty when absent
  std::optional<SurfaceDescriptors> descriptors;

  PointCloud() = default;
  explicit PointCloud(Positions p) : positions(std::move(p)) {}

  std::size_t size() const { return positions.size(); }
  bool has_normals() const { return !normals.empty(); }

  /// Throws EmptyCloud / InvalidCloud when an invariant is broken.
  void validate() const;
};

struct Mesh {
  Positions positions;
  std::vector<Face> faces;

  /// Throws InvalidMesh on out-of-range or repeated face indices.
  void validate() const;
};

struct BoundingBox {
  Vec3 min;
  Vec3 max;
  double diagonal() const { return (max - min).norm(); }
};

BoundingBox bounding_box(std::span<const Vec3> points);

}  // namespace pcs
