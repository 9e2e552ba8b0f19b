#include "pcsimp/descriptors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "pcsimp/error.hpp"
#include "pcsimp/knn.hpp"

namespace pcs {

namespace {

constexpr double kSignTolerance = 1e-12;
constexpr double kEigenClamp = 1e-12;

void rotate(Eigen::Matrix3d& a, Eigen::Matrix3d& v, int p, int q) {
  const double apq = a(p, q);
  if (apq == 0.0) return;
  const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (std::abs(theta) > 1e150) {
    t = 0.5 / theta;
  } else {
    t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
  }
  const double c = 1.0 / std::sqrt(t * t + 1.0);
  const double s = t * c;

  Eigen::Matrix3d j = Eigen::Matrix3d::Identity();
  j(p, p) = c;
  j(q, q) = c;
  j(p, q) = s;
  j(q, p) = -s;
  a = j.transpose() * a * j;
  a(p, q) = a(q, p) = 0.0;
  v = v * j;
}

}  // namespace

SymmetricEigen symmetric_eigen3(const Eigen::Matrix3d& m) {
  Eigen::Matrix3d a = 0.5 * (m + m.transpose());
  Eigen::Matrix3d v = Eigen::Matrix3d::Identity();

  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2);
    const double diag = a(0, 0) * a(0, 0) + a(1, 1) * a(1, 1) + a(2, 2) * a(2, 2);
    if (off == 0.0 || off <= 1e-34 * diag) break;
    rotate(a, v, 0, 1);
    rotate(a, v, 0, 2);
    rotate(a, v, 1, 2);
  }

  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return a(x, x) < a(y, y); });

  SymmetricEigen out;
  for (int c = 0; c < 3; ++c) {
    out.values[c] = a(order[c], order[c]);
    out.vectors.col(c) = v.col(order[c]).normalized();
  }
  return out;
}

Vec3 canonical_sign(const Vec3& v) {
  for (int axis : {2, 1, 0}) {
    if (v[axis] > kSignTolerance) return v;
    if (v[axis] < -kSignTolerance) return -v;
  }
  return v;
}

Eigen::Matrix3d scatter_matrix(std::span<const Vec3> points, std::size_t i,
                               std::span<const Index> neighbors) {
  Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
  const Vec3& pi = points[i];
  for (Index j : neighbors) {
    const Vec3 e = points[j] - pi;
    c.noalias() += e * e.transpose();
  }
  return c;
}

CovarianceFrame covariance_frame(std::span<const Vec3> points, std::size_t i,
                                 std::span<const Index> neighbors) {
  if (neighbors.size() < 3)
    throw Error(ErrorCode::BadParams, "covariance frame needs at least 3 neighbors");

  const Eigen::Matrix3d c = scatter_matrix(points, i, neighbors);
  CovarianceFrame frame;
  if (c.isZero(0.0)) {
    frame.eigenvalues.setZero();
    frame.eigenvectors.setIdentity();
    frame.normal = Vec3::UnitZ();
    frame.eigenvectors.col(0) = Vec3::UnitZ();
    frame.eigenvectors.col(1) = Vec3::UnitX();
    frame.eigenvectors.col(2) = Vec3::UnitY();
    frame.degenerate = true;
    return frame;
  }

  const SymmetricEigen eig = symmetric_eigen3(c);
  for (int a = 0; a < 3; ++a) {
    // The scatter matrix is PSD; anything negative is round-off.
    double lambda = eig.values[a];
    if (lambda < 0.0 && lambda >= -kEigenClamp * std::max(1.0, c.trace())) lambda = 0.0;
    frame.eigenvalues[a] = std::max(lambda, 0.0);
  }
  const Vec3 n = canonical_sign(eig.vectors.col(0));
  const Vec3 t = canonical_sign(eig.vectors.col(1));
  frame.normal = n;
  frame.eigenvectors.col(0) = n;
  frame.eigenvectors.col(1) = t;
  frame.eigenvectors.col(2) = n.cross(t);
  return frame;
}

double curvature(const Vec3& eigenvalues) {
  const double sum = eigenvalues.sum();
  if (sum <= 0.0) return 0.0;
  return eigenvalues[0] / sum;
}

std::vector<double> bandwidths(std::span<const Vec3> points, const NeighborGraph& graph,
                               const BandwidthPolicy& policy) {
  std::vector<double> h(graph.size(), policy.global_h);
  if (policy.kind == BandwidthPolicy::Kind::Global) {
    if (!(policy.global_h > 0.0)) throw Error(ErrorCode::BadParams, "bandwidth h must be positive");
    return h;
  }
  for (std::size_t i = 0; i < graph.size(); ++i) {
    double far2 = 0.0;
    for (Index j : graph.neighbors(i)) far2 = std::max(far2, (points[j] - points[i]).squaredNorm());
    // All-coincident neighborhoods still need a positive h; any tiny value gives uniform weights.
    h[i] = std::max(far2, std::numeric_limits<double>::min());
  }
  return h;
}

std::vector<double> mean_curvature(std::span<const Vec3> points, std::span<const double> curvatures,
                                   const NeighborGraph& graph, std::span<const double> h) {
  if (curvatures.size() != graph.size() || h.size() != graph.size())
    throw Error(ErrorCode::LengthMismatch, "mean curvature inputs differ in length");
  std::vector<double> out(graph.size());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto nbrs = graph.neighbors(i);
    if (nbrs.empty()) {
      out[i] = curvatures[i];
      continue;
    }
    double num = 0.0;
    double den = 0.0;
    for (Index j : nbrs) {
      const double w = std::exp(-(points[j] - points[i]).squaredNorm() / h[i]);
      num += w * curvatures[j];
      den += w;
    }
    // den can underflow only when every neighbor is many bandwidths away.
    out[i] = den > 0.0 ? num / den : curvatures[i];
  }
  return out;
}

std::vector<double> roughness(std::span<const double> curvatures,
                              std::span<const double> mean_curvatures) {
  if (curvatures.size() != mean_curvatures.size())
    throw Error(ErrorCode::LengthMismatch, "roughness inputs differ in length");
  std::vector<double> out(curvatures.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(curvatures[i] - mean_curvatures[i]);
  return out;
}

SurfaceDescriptors compute_descriptors_on_graph(std::span<const Vec3> points, NeighborGraph graph,
                                                const BandwidthPolicy& policy) {
  const std::size_t n = points.size();
  if (graph.size() != n) throw Error(ErrorCode::LengthMismatch, "graph size differs from cloud size");

  SurfaceDescriptors d;
  d.policy = policy;
  d.eigenvalues.assign(n, Vec3::Zero());
  d.normals.assign(n, Vec3::UnitZ());
  d.curvature.assign(n, 0.0);
  d.degenerate.assign(n, 1);

  for (std::size_t i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(i);
    if (nbrs.size() < 3) continue;
    const CovarianceFrame frame = covariance_frame(points, i, nbrs);
    d.eigenvalues[i] = frame.eigenvalues;
    d.normals[i] = frame.normal;
    d.curvature[i] = curvature(frame.eigenvalues);
    d.degenerate[i] = frame.degenerate ? 1 : 0;
  }
  d.bandwidth = bandwidths(points, graph, policy);
  d.mean_curvature = mean_curvature(points, d.curvature, graph, d.bandwidth);
  d.roughness = roughness(d.curvature, d.mean_curvature);
  d.graph = std::move(graph);
  return d;
}

SurfaceDescriptors compute_descriptors(std::span<const Vec3> points, std::size_t k,
                                       const BandwidthPolicy& policy) {
  if (points.empty()) throw Error(ErrorCode::EmptyCloud, "descriptors of an empty cloud");
  if (k == 0) throw Error(ErrorCode::BadParams, "descriptor k must be at least 1");
  NeighborGraph graph;
  if (points.size() >= 2) {
    graph = build_knn(points, std::min(k, points.size() - 1));
  } else {
    graph.offsets.assign(points.size() + 1, 0);
  }
  return compute_descriptors_on_graph(points, std::move(graph), policy);
}

SurfaceDescriptors compute_descriptors(const PointCloud& cloud, std::size_t k,
                                       const BandwidthPolicy& policy) {
  cloud.validate();
  return compute_descriptors(cloud.positions, k, policy);
}

}  // namespace pcs
