#include "pcsimp/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pcsimp/descriptors.hpp"
#include "pcsimp/error.hpp"
#include "pcsimp/knn.hpp"

namespace pcs {

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw Error(ErrorCode::BadParams, "tau must be positive");
  if (!(lambda_curv >= 0.0)) throw Error(ErrorCode::BadParams, "lambda must be nonnegative");
  if (descriptor_k == 0) throw Error(ErrorCode::BadParams, "descriptor k must be positive");
}

namespace {

void require_nonempty(std::span<const Vec3> p1, std::span<const Vec3> p2) {
  if (p1.empty() || p2.empty()) throw Error(ErrorCode::EmptyCloud, "loss between empty point sets");
}

// Squared distance from every point of `from` to its nearest point of `to`.
std::vector<double> nearest_dist2(std::span<const Vec3> from, std::span<const Vec3> to) {
  const KdTree tree(to);
  std::vector<double> out(from.size());
  for (std::size_t i = 0; i < from.size(); ++i) out[i] = tree.nearest(from[i]).dist2;
  return out;
}

}  // namespace

double chamfer(std::span<const Vec3> p1, std::span<const Vec3> p2) {
  require_nonempty(p1, p2);
  double total = 0.0;
  for (double d : nearest_dist2(p1, p2)) total += d;
  for (double d : nearest_dist2(p2, p1)) total += d;
  return total;
}

std::vector<double> curvature_weights(std::span<const double> mean_curvature, const LossConfig& config) {
  config.validate();
  const std::size_t n = mean_curvature.size();
  std::vector<double> w(n, 0.5);
  if (n == 0) return w;

  const auto [lo, hi] = std::minmax_element(mean_curvature.begin(), mean_curvature.end());
  if (*lo == *hi) return w;

  std::vector<double> z(n, 0.0);
  if (config.weight_normalization == LossConfig::Normalization::ZScore) {
    double mean = 0.0;
    for (double v : mean_curvature) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : mean_curvature) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    if (!(sd > 0.0)) return w;
    for (std::size_t i = 0; i < n; ++i) z[i] = (mean_curvature[i] - mean) / sd;
  } else {
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < n; ++i) z[i] = (mean_curvature[i] - *lo) / range;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double s = config.weight_combine == LossConfig::Combine::Multiply ? z[i] * config.tau
                                                                             : z[i] / config.tau;
    w[i] = 1.0 / (1.0 + std::exp(-s));
  }
  return w;
}

double adaptive_chamfer(std::span<const Vec3> p1, std::span<const Vec3> p2,
                        std::span<const double> weights) {
  require_nonempty(p1, p2);
  if (weights.size() != p1.size()) throw Error(ErrorCode::LengthMismatch, "one weight per P1 point required");
  const auto d12 = nearest_dist2(p1, p2);
  double total = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) total += weights[i] * d12[i];
  for (double d : nearest_dist2(p2, p1)) total += d;
  return total;
}

double field_error(std::span<const Vec3> p1, std::span<const double> field1, std::span<const Vec3> p2,
                   std::span<const double> field2) {
  require_nonempty(p1, p2);
  if (field1.size() != p1.size() || field2.size() != p2.size())
    throw Error(ErrorCode::LengthMismatch, "field length differs from point count");
  const KdTree tree(p2);
  double sum = 0.0;
  for (std::size_t i = 0; i < p1.size(); ++i) {
    const double d = field1[i] - field2[tree.nearest(p1[i]).index];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(p1.size()));
}

double curvature_error(std::span<const Vec3> p1, std::span<const double> mean_curvature1,
                       std::span<const Vec3> p2, std::span<const double> mean_curvature2) {
  return field_error(p1, mean_curvature1, p2, mean_curvature2);
}

LossStructure loss_structure(std::span<const Vec3> p1, std::span<const Vec3> p2, const LossConfig& config) {
  require_nonempty(p1, p2);
  LossStructure s;
  s.nearest_in_p2 = nearest_indices(p1, KdTree(p2));
  s.nearest_in_p1 = nearest_indices(p2, KdTree(p1));
  if (p2.size() >= 2) {
    s.p2_graph = build_knn(p2, std::min(config.descriptor_k, p2.size() - 1));
  } else {
    s.p2_graph.offsets.assign(p2.size() + 1, 0);
  }
  return s;
}

Positions mean_curvature_gradient(std::span<const Vec3> points, const SurfaceDescriptors& d,
                                  std::span<const double> upstream) {
  const std::size_t n = points.size();
  if (d.size() != n || upstream.size() != n)
    throw Error(ErrorCode::LengthMismatch, "descriptor gradient inputs differ in length");
  const NeighborGraph& graph = d.graph;
  const bool adaptive_h = d.policy.kind == BandwidthPolicy::Kind::KthNeighbor;

  Positions grad(n, Vec3::Zero());
  std::vector<double> d_curv(n, 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    const double g = upstream[i];
    if (g == 0.0) continue;
    const auto nbrs = graph.neighbors(i);
    if (nbrs.empty()) {
      d_curv[i] += g;
      continue;
    }
    const double h = d.bandwidth[i];
    double wsum = 0.0;
    for (Index j : nbrs) wsum += std::exp(-(points[j] - points[i]).squaredNorm() / h);
    if (!(wsum > 0.0)) {
      d_curv[i] += g;
      continue;
    }
    double d_h = 0.0;
    Index far = nbrs.front();
    double far2 = -1.0;
    for (Index j : nbrs) {
      const Vec3 e = points[j] - points[i];
      const double dist2 = e.squaredNorm();
      if (dist2 > far2) {
        far2 = dist2;
        far = j;
      }
      const double w = std::exp(-dist2 / h);
      d_curv[j] += g * w / wsum;
      const double d_w = g * (d.curvature[j] - d.mean_curvature[i]) / wsum;
      const double d_dist2 = -d_w * w / h;
      d_h += d_w * w * dist2 / (h * h);
      grad[j] += 2.0 * d_dist2 * e;
      grad[i] -= 2.0 * d_dist2 * e;
    }
    // h_i is the squared distance to the farthest listed neighbor.
    if (adaptive_h && far2 > 0.0 && h == far2) {
      const Vec3 e = points[far] - points[i];
      grad[far] += 2.0 * d_h * e;
      grad[i] -= 2.0 * d_h * e;
    }
  }

  // kappa = lambda0 / trace(C): d kappa / dC = (v0 v0^T - kappa I) / trace.
  for (std::size_t j = 0; j < n; ++j) {
    if (d_curv[j] == 0.0 || d.degenerate[j]) continue;
    const double trace = d.eigenvalues[j].sum();
    if (!(trace > 0.0)) continue;
    const Vec3& v0 = d.normals[j];
    const Eigen::Matrix3d d_c =
        d_curv[j] * (v0 * v0.transpose() - d.curvature[j] * Eigen::Matrix3d::Identity()) / trace;
    for (Index l : graph.neighbors(j)) {
      const Vec3 de = 2.0 * d_c * (points[l] - points[j]);
      grad[l] += de;
      grad[j] -= de;
    }
  }
  return grad;
}

LossValue evaluate_total_loss(std::span<const Vec3> p1, std::span<const double> mean_curvature1,
                              std::span<const double> weights, std::span<const Vec3> p2,
                              const LossStructure& s, const LossConfig& config, bool with_gradient) {
  require_nonempty(p1, p2);
  if (weights.size() != p1.size() || mean_curvature1.size() != p1.size())
    throw Error(ErrorCode::LengthMismatch, "reference fields differ from P1 size");
  if (s.nearest_in_p2.size() != p1.size() || s.nearest_in_p1.size() != p2.size() ||
      s.p2_graph.size() != p2.size())
    throw Error(ErrorCode::LengthMismatch, "loss structure does not match the inputs");

  LossValue out;
  if (with_gradient) out.gradient.assign(p2.size(), Vec3::Zero());

  for (std::size_t i = 0; i < p1.size(); ++i) {
    const Index y = s.nearest_in_p2[i];
    const Vec3 e = p2[y] - p1[i];
    out.adaptive_cd += weights[i] * e.squaredNorm();
    if (with_gradient) out.gradient[y] += 2.0 * weights[i] * e;
  }
  for (std::size_t y = 0; y < p2.size(); ++y) {
    const Vec3 e = p2[y] - p1[s.nearest_in_p1[y]];
    out.adaptive_cd += e.squaredNorm();
    if (with_gradient) out.gradient[y] += 2.0 * e;
  }

  if (config.lambda_curv > 0.0) {
    const SurfaceDescriptors d2 = compute_descriptors_on_graph(p2, s.p2_graph, config.bandwidth);
    double sum = 0.0;
    std::vector<double> d_mean(p2.size(), 0.0);
    for (std::size_t i = 0; i < p1.size(); ++i) {
      const Index y = s.nearest_in_p2[i];
      const double diff = d2.mean_curvature[y] - mean_curvature1[i];
      sum += diff * diff;
      d_mean[y] += diff;
    }
    const double n1 = static_cast<double>(p1.size());
    out.curvature_error = std::sqrt(sum / n1);
    if (with_gradient && config.curvature_gradient && out.curvature_error > 0.0) {
      const double scale = config.lambda_curv / (n1 * out.curvature_error);
      for (double& v : d_mean) v *= scale;
      const Positions g = mean_curvature_gradient(p2, d2, d_mean);
      for (std::size_t y = 0; y < p2.size(); ++y) out.gradient[y] += g[y];
    }
  }
  out.total = out.adaptive_cd + config.lambda_curv * out.curvature_error;
  return out;
}

LossValue total_loss(std::span<const Vec3> p1, const SurfaceDescriptors& reference, std::span<const Vec3> p2,
                     const LossConfig& config, bool with_gradient) {
  config.validate();
  const auto weights = curvature_weights(reference.mean_curvature, config);
  const LossStructure s = loss_structure(p1, p2, config);
  return evaluate_total_loss(p1, reference.mean_curvature, weights, p2, s, config, with_gradient);
}

}  // namespace pcs
