#pragma once

#include <span>
#include <vector>

#include "pcsimp/geometry.hpp"

namespace pcs {

struct LossConfig {
  enum class Normalization { ZScore, MinMax };
  enum class Combine { Multiply, Divide };

  /// Temperature applied to the normalized mean curvature before the sigmoid.
  double tau = 10.0;
  /// Weight of the curvature error term.
  double lambda_curv = 1.0;
  Normalization weight_normalization = Normalization::ZScore;
  Combine weight_combine = Combine::Multiply;
  /// When false the curvature error contributes its value but no gradient.
  bool curvature_gradient = true;
  /// Descriptor settings used for the simplified cloud.
  std::size_t descriptor_k = 20;
  BandwidthPolicy bandwidth;

  void validate() const;
};

/// Symmetric squared Chamfer distance (sum over both directions, not mean).
double chamfer(std::span<const Vec3> p1, std::span<const Vec3> p2);

/// Per-point weights sigma(normalize(mean_curvature) combined with tau).
/// A constant field yields 0.5 everywhere.
std::vector<double> curvature_weights(std::span<const double> mean_curvature, const LossConfig& config);

/// Chamfer distance whose P1 -> P2 coverage term is weighted per P1 point.
double adaptive_chamfer(std::span<const Vec3> p1, std::span<const Vec3> p2,
                        std::span<const double> weights);

/// Directional RMS difference of a scalar field between each P1 point and its
/// nearest P2 point. With mean curvature this is CE; with roughness, RE.
double field_error(std::span<const Vec3> p1, std::span<const double> field1,
                   std::span<const Vec3> p2, std::span<const double> field2);

double curvature_error(std::span<const Vec3> p1, std::span<const double> mean_curvature1,
                       std::span<const Vec3> p2, std::span<const double> mean_curvature2);

/// Discrete choices the loss depends on, frozen for one optimization step.
struct LossStructure {
  std::vector<Index> nearest_in_p2;  // per P1 point
  std::vector<Index> nearest_in_p1;  // per P2 point
  NeighborGraph p2_graph;            // descriptor neighborhoods of the simplified cloud
};

LossStructure loss_structure(std::span<const Vec3> p1, std::span<const Vec3> p2, const LossConfig& config);

struct LossValue {
  double total = 0.0;
  double adaptive_cd = 0.0;
  double curvature_error = 0.0;
  Positions gradient;  // d total / d p2, empty unless requested
};

/// adaptive_chamfer + lambda * CE for a fixed structure. The curvature of P2 is
/// recomputed from `p2` over structure.p2_graph, so the gradient includes its
/// dependence on the output coordinates.
LossValue evaluate_total_loss(std::span<const Vec3> p1, std::span<const double> mean_curvature1,
                              std::span<const double> weights, std::span<const Vec3> p2,
                              const LossStructure& structure, const LossConfig& config,
                              bool with_gradient);

/// Convenience: weights and structure derived from the current inputs.
LossValue total_loss(std::span<const Vec3> p1, const SurfaceDescriptors& reference,
                     std::span<const Vec3> p2, const LossConfig& config, bool with_gradient = true);

/// Reverse pass of compute_descriptors_on_graph's mean curvature with respect to
/// the point positions (neighborhoods fixed).
Positions mean_curvature_gradient(std::span<const Vec3> points, const SurfaceDescriptors& descriptors,
                                  std::span<const double> upstream);

}  // namespace pcs
