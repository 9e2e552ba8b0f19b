#pragma once

#include <span>
#include <string>
#include <vector>

#include "pcsimp/geometry.hpp"
#include "pcsimp/losses.hpp"

namespace pcs {

struct SdmConfig {
  /// Which structure term to use: |s1 s2 - cov| / (s1 s2), or the variant with
  /// the covariance squared.
  enum class CovarianceForm { Covariance, SquaredCovariance };

  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double pooling_exponent = 3.0;
  double epsilon = 1e-9;
  CovarianceForm covariance_form = CovarianceForm::Covariance;

  void validate() const;
};

struct MetricsConfig {
  std::size_t descriptor_k = 20;
  BandwidthPolicy bandwidth;
  LossConfig loss;  // curvature weights of the adaptive Chamfer column
  SdmConfig sdm;
};

struct MetricsReport {
  double cd = 0.0;
  double adaptive_cd = 0.0;
  double ce = 0.0;
  double re = 0.0;
  double nc = 0.0;
  double sdm = 0.0;
  double ratio = 0.0;
  double wall_time_ms = 0.0;
};

/// RMS roughness difference from each P1 point to its nearest P2 point.
double roughness_error(std::span<const Vec3> p1, std::span<const double> roughness1,
                       std::span<const Vec3> p2, std::span<const double> roughness2);

/// Bi-directional mean of 1 - |cos| between nearest-neighbor normals, in [0, 2].
/// Throws ZeroNormal for normals shorter than 1e-12.
double normals_consistency(std::span<const Vec3> p1, std::span<const Vec3> normals1,
                           std::span<const Vec3> p2, std::span<const Vec3> normals2);

/// Local distortion D_i for every P1 point against its nearest P2 point.
std::vector<double> sdm_pointwise(std::span<const Vec3> p1, const SurfaceDescriptors& d1,
                                  std::span<const Vec3> p2, const SurfaceDescriptors& d2,
                                  const SdmConfig& config);

/// Minkowski pooling (mean D^p)^(1/p).
double minkowski_pool(std::span<const double> values, double exponent);

double sdm(std::span<const Vec3> p1, const SurfaceDescriptors& d1, std::span<const Vec3> p2,
           const SurfaceDescriptors& d2, const SdmConfig& config);

/// All six metrics with shared descriptor settings. Cached descriptors on the
/// clouds are reused. wall_time_ms is left at 0 for the caller to fill.
MetricsReport evaluate_pair(const PointCloud& reference, const PointCloud& simplified,
                            const MetricsConfig& config = {});

/// Column order of metrics_csv_row.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);
/// One "key: value" line per field.
std::string metrics_record(const MetricsReport& report);

}  // namespace pcs
