#pragma once

#include <vector>

#include <Eigen/Core>

#include "pcsimp/geometry.hpp"

namespace pcs {

/// Symmetric 4x4 error quadric; v^T Q v is a weighted sum of squared plane distances.
struct Quadric {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();

  /// Quadric of plane (a, b, c, d) with unit normal (a, b, c).
  static Quadric from_plane(const Eigen::Vector4d& plane, double weight = 1.0);

  double evaluate(const Vec3& v) const;

  Quadric& operator+=(const Quadric& other) {
    m += other.m;
    return *this;
  }
  friend Quadric operator+(Quadric a, const Quadric& b) { return a += b; }
};

struct QemOptions {
  /// Weight of the perpendicular constraint planes added along boundary edges.
  double boundary_weight = 1e3;
  /// Above this condition number the optimal placement is abandoned.
  double condition_limit = 1e8;
};

struct Contraction {
  Vec3 position;
  double cost = 0.0;
  bool optimal = false;
};

/// Placement minimizing v^T Q v, or the cheapest of midpoint / endpoints when
/// the 3x3 system is near-singular.
Contraction optimal_contraction(const Quadric& q, const Vec3& a, const Vec3& b,
                                double condition_limit = 1e8);

/// Per-vertex quadrics: face planes plus weighted boundary planes.
std::vector<Quadric> vertex_quadrics(const Mesh& mesh, const QemOptions& options = {});

struct QemResult {
  Mesh mesh;
  std::size_t achieved_vertices = 0;
  /// Cost of every accepted collapse, in order.
  std::vector<double> collapse_costs;
};

/// Garland-Heckbert edge-collapse decimation down to `target_vertices`.
/// Throws NotAMesh for non-manifold edges or meshes without faces, and
/// TargetTooSmall for targets below 4.
QemResult qem_simplify(const Mesh& mesh, std::size_t target_vertices, const QemOptions& options = {});

}  // namespace pcs
