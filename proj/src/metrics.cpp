#include "pcsimp/metrics.hpp"

#include <cmath>

#include "pcsimp/descriptors.hpp"
#include "pcsimp/error.hpp"
#include "pcsimp/knn.hpp"
#include "pcsimp/text.hpp"

namespace pcs {

void SdmConfig::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0 || !(alpha + beta + gamma > 0.0))
    throw Error(ErrorCode::BadParams, "SDM weights must be nonnegative with a positive sum");
  if (!(pooling_exponent >= 1.0)) throw Error(ErrorCode::BadParams, "pooling exponent must be >= 1");
}

double roughness_error(std::span<const Vec3> p1, std::span<const double> roughness1,
                       std::span<const Vec3> p2, std::span<const double> roughness2) {
  return field_error(p1, roughness1, p2, roughness2);
}

namespace {

double nc_direction(std::span<const Vec3> from, std::span<const Vec3> nfrom, std::span<const Vec3> to,
                    std::span<const Vec3> nto) {
  const KdTree tree(to);
  double sum = 0.0;
  for (std::size_t i = 0; i < from.size(); ++i) {
    const Vec3& a = nfrom[i];
    const Vec3& b = nto[tree.nearest(from[i]).index];
    const double cosine = std::clamp(std::abs(a.dot(b)) / (a.norm() * b.norm()), 0.0, 1.0);
    sum += 1.0 - cosine;
  }
  return sum / static_cast<double>(from.size());
}

struct LocalStats {
  double mean = 0.0;
  double var = 0.0;
};

// Gaussian-weighted mean and variance of curvature over point i's neighborhood.
LocalStats local_stats(std::span<const Vec3> points, const SurfaceDescriptors& d, std::size_t i) {
  const auto nbrs = d.graph.neighbors(i);
  LocalStats s{d.mean_curvature[i], 0.0};
  if (nbrs.empty()) return s;
  double wsum = 0.0;
  double acc = 0.0;
  for (Index j : nbrs) {
    const double w = std::exp(-(points[j] - points[i]).squaredNorm() / d.bandwidth[i]);
    const double dev = d.curvature[j] - s.mean;
    acc += w * dev * dev;
    wsum += w;
  }
  s.var = wsum > 0.0 ? acc / wsum : 0.0;
  return s;
}

}  // namespace

double normals_consistency(std::span<const Vec3> p1, std::span<const Vec3> normals1, std::span<const Vec3> p2,
                           std::span<const Vec3> normals2) {
  if (p1.empty() || p2.empty()) throw Error(ErrorCode::EmptyCloud, "normals consistency of empty sets");
  if (normals1.size() != p1.size() || normals2.size() != p2.size())
    throw Error(ErrorCode::LengthMismatch, "one normal per point required");
  for (const auto* ns : {&normals1, &normals2})
    for (const Vec3& n : *ns)
      if (n.norm() < 1e-12) throw Error(ErrorCode::ZeroNormal, "normal of (near) zero length");
  return nc_direction(p1, normals1, p2, normals2) + nc_direction(p2, normals2, p1, normals1);
}

std::vector<double> sdm_pointwise(std::span<const Vec3> p1, const SurfaceDescriptors& d1,
                                  std::span<const Vec3> p2, const SurfaceDescriptors& d2,
                                  const SdmConfig& config) {
  config.validate();
  if (p1.empty() || p2.empty()) throw Error(ErrorCode::EmptyCloud, "SDM of empty sets");
  if (d1.size() != p1.size() || d2.size() != p2.size())
    throw Error(ErrorCode::LengthMismatch, "descriptors do not match the clouds");

  const KdTree tree2(p2);
  const std::vector<Index> corr = nearest_indices(p1, tree2);
  const double eps = config.epsilon;
  const double wsum_terms = config.alpha + config.beta + config.gamma;

  std::vector<double> out(p1.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    const LocalStats s1 = local_stats(p1, d1, i);
    const LocalStats s2 = local_stats(p2, d2, corr[i]);

    // Cross statistics over P1's neighborhood, pairing each neighbor with its P2 correspondent.
    double cov = 0.0;
    const auto nbrs = d1.graph.neighbors(i);
    if (!nbrs.empty()) {
      double wsum = 0.0;
      double mean2 = 0.0;
      std::vector<double> w(nbrs.size());
      for (std::size_t t = 0; t < nbrs.size(); ++t) {
        w[t] = std::exp(-(p1[nbrs[t]] - p1[i]).squaredNorm() / d1.bandwidth[i]);
        wsum += w[t];
        mean2 += w[t] * d2.curvature[corr[nbrs[t]]];
      }
      if (wsum > 0.0) {
        mean2 /= wsum;
        for (std::size_t t = 0; t < nbrs.size(); ++t)
          cov += w[t] * (d1.curvature[nbrs[t]] - s1.mean) * (d2.curvature[corr[nbrs[t]]] - mean2);
        cov /= wsum;
      }
    }

    const double sigma1 = std::sqrt(s1.var);
    const double sigma2 = std::sqrt(s2.var);
    const double sigma12 = std::sqrt(s1.var * s2.var);
    const double peak = std::max(s1.mean, s2.mean);
    const double l_term = std::abs(s1.mean - s2.mean) / (peak + eps);
    const double c_term = std::abs(sigma1 - sigma2) / (peak + eps);
    const double cross = config.covariance_form == SdmConfig::CovarianceForm::Covariance ? cov : cov * cov;
    const double s_term = std::abs(sigma12 - cross) / (sigma12 + eps);
    out[i] = (config.alpha * l_term + config.beta * c_term + config.gamma * s_term) / wsum_terms;
  }
  return out;
}

double minkowski_pool(std::span<const double> values, double exponent) {
  if (values.empty()) return 0.0;
  double acc = 0.0;
  for (double v : values) acc += std::pow(v, exponent);
  return std::pow(acc / static_cast<double>(values.size()), 1.0 / exponent);
}

double sdm(std::span<const Vec3> p1, const SurfaceDescriptors& d1, std::span<const Vec3> p2,
           const SurfaceDescriptors& d2, const SdmConfig& config) {
  const auto d = sdm_pointwise(p1, d1, p2, d2, config);
  return minkowski_pool(d, config.pooling_exponent);
}

MetricsReport evaluate_pair(const PointCloud& reference, const PointCloud& simplified,
                            const MetricsConfig& config) {
  reference.validate();
  simplified.validate();
  const auto& p1 = reference.positions;
  const auto& p2 = simplified.positions;
  const SurfaceDescriptors d1 = reference.descriptors
                                    ? *reference.descriptors
                                    : compute_descriptors(p1, config.descriptor_k, config.bandwidth);
  const SurfaceDescriptors d2 = simplified.descriptors
                                    ? *simplified.descriptors
                                    : compute_descriptors(p2, config.descriptor_k, config.bandwidth);

  MetricsReport r;
  r.cd = chamfer(p1, p2);
  r.adaptive_cd = adaptive_chamfer(p1, p2, curvature_weights(d1.mean_curvature, config.loss));
  r.ce = curvature_error(p1, d1.mean_curvature, p2, d2.mean_curvature);
  r.re = roughness_error(p1, d1.roughness, p2, d2.roughness);
  r.nc = normals_consistency(p1, d1.normals, p2, d2.normals);
  r.sdm = sdm(p1, d1, p2, d2, config.sdm);
  r.ratio = static_cast<double>(p2.size()) / static_cast<double>(p1.size());
  return r;
}

std::string metrics_csv_header() { return "cd,adaptive_cd,ce,re,nc,sdm,ratio,wall_time_ms"; }

std::string metrics_csv_row(const MetricsReport& r) {
  std::string out;
  for (double v : {r.cd, r.adaptive_cd, r.ce, r.re, r.nc, r.sdm, r.ratio, r.wall_time_ms}) {
    if (!out.empty()) out += ',';
    out += format_double(v);
  }
  return out;
}

std::string metrics_record(const MetricsReport& r) {
  return "cd: " + format_double(r.cd) + "\nadaptive_cd: " + format_double(r.adaptive_cd) +
         "\nce: " + format_double(r.ce) + "\nre: " + format_double(r.re) + "\nnc: " + format_double(r.nc) +
         "\nsdm: " + format_double(r.sdm) + "\nratio: " + format_double(r.ratio) +
         "\nwall_time_ms: " + format_double(r.wall_time_ms) + "\n";
}

}  // namespace pcs
