#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "pcsimp/geometry.hpp"

namespace pcs {

/// Eigen-decomposition of a symmetric 3x3 matrix, eigenvalues ascending and
/// eigenvectors stored as matrix columns in the same order.
struct SymmetricEigen {
  Vec3 values;
  Eigen::Matrix3d vectors;
};

/// Cyclic Jacobi rotations; deterministic and exact on diagonal input.
SymmetricEigen symmetric_eigen3(const Eigen::Matrix3d& m);

/// Flips `v` so that v.z >= 0, falling back to +y then +x when the leading
/// component is zero.
Vec3 canonical_sign(const Vec3& v);

/// Scatter matrix sum_j (p_j - p_i)(p_j - p_i)^T over the listed neighbors.
Eigen::Matrix3d scatter_matrix(std::span<const Vec3> points, std::size_t i,
                               std::span<const Index> neighbors);

struct CovarianceFrame {
  Vec3 eigenvalues;          // ascending, clamped at 0
  Eigen::Matrix3d eigenvectors;  // right-handed, column 0 is the normal
  Vec3 normal;
  bool degenerate = false;
};

/// Local frame of point i from its neighborhood. Requires at least 3 neighbors.
/// A neighborhood that collapses onto p_i is flagged degenerate with zero
/// eigenvalues and normal +z.
CovarianceFrame covariance_frame(std::span<const Vec3> points, std::size_t i,
                                 std::span<const Index> neighbors);

/// lambda0 / (lambda0 + lambda1 + lambda2), or 0 when the sum vanishes.
double curvature(const Vec3& eigenvalues);

/// Per-point bandwidth h following `policy`.
std::vector<double> bandwidths(std::span<const Vec3> points, const NeighborGraph& graph,
                               const BandwidthPolicy& policy);

/// Gaussian-weighted average of neighbor curvatures with weights exp(-d^2 / h_i).
std::vector<double> mean_curvature(std::span<const Vec3> points, std::span<const double> curvatures,
                                   const NeighborGraph& graph, std::span<const double> h);

/// |kappa - mean kappa| per point.
std::vector<double> roughness(std::span<const double> curvatures,
                              std::span<const double> mean_curvatures);

/// Full descriptor pass. k is clamped to N-1; clouds with fewer than four points
/// yield flagged-degenerate descriptors.
SurfaceDescriptors compute_descriptors(std::span<const Vec3> points, std::size_t k,
                                       const BandwidthPolicy& policy = {});
SurfaceDescriptors compute_descriptors(const PointCloud& cloud, std::size_t k,
                                       const BandwidthPolicy& policy = {});

/// Descriptor pass over a caller-supplied neighborhood structure.
SurfaceDescriptors compute_descriptors_on_graph(std::span<const Vec3> points, NeighborGraph graph,
                                                const BandwidthPolicy& policy = {});

}  // namespace pcs
