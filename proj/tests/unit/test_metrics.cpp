#include <gtest/gtest.h>

#include <random>

#include "pcsimp/descriptors.hpp"
#include "pcsimp/error.hpp"
#include "pcsimp/metrics.hpp"
#include "pcsimp/sampling.hpp"
#include "pcsimp/synth.hpp"
#include "support/oracles.hpp"

using namespace pcs;

namespace {

Positions bumpy(std::size_t n, std::uint64_t seed) {
  return synth_shape(ShapeKind::BumpySphere, n, seed).cloud.positions;
}

double brute_nc_direction(const Positions& a, const std::vector<Vec3>& na, const Positions& b,
                          const std::vector<Vec3>& nb) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Vec3& m = nb[oracle::nearest(b, a[i])];
    s += 1.0 - std::abs(na[i].normalized().dot(m.normalized()));
  }
  return s / static_cast<double>(a.size());
}

double brute_field_error(const Positions& a, const std::vector<double>& fa, const Positions& b,
                         const std::vector<double>& fb) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::pow(fa[i] - fb[oracle::nearest(b, a[i])], 2);
  return std::sqrt(s / static_cast<double>(a.size()));
}

// Two-point clouds with hand-set descriptors, each point the other's only neighbor.
SurfaceDescriptors two_point_descriptors(double k0, double k1, double mk0, double mk1) {
  SurfaceDescriptors d;
  d.curvature = {k0, k1};
  d.mean_curvature = {mk0, mk1};
  d.roughness = {std::abs(k0 - mk0), std::abs(k1 - mk1)};
  d.bandwidth = {1.0, 1.0};
  d.normals = {Vec3::UnitZ(), Vec3::UnitZ()};
  d.eigenvalues = {Vec3::Zero(), Vec3::Zero()};
  d.degenerate = {0, 0};
  d.graph.k = 1;
  d.graph.offsets = {0, 1, 2};
  d.graph.indices = {1, 0};
  return d;
}

}  // namespace

TEST(Metrics, IdenticalCloudsScoreZero) {
  const PointCloud c(bumpy(600, 3));
  const MetricsReport r = evaluate_pair(c, c);
  EXPECT_EQ(r.cd, 0.0);
  EXPECT_EQ(r.adaptive_cd, 0.0);
  EXPECT_EQ(r.ce, 0.0);
  EXPECT_EQ(r.re, 0.0);
  EXPECT_EQ(r.nc, 0.0);
  EXPECT_EQ(r.sdm, 0.0);
  EXPECT_EQ(r.ratio, 1.0);
}

TEST(Metrics, RigidMotionInvariance) {
  const Positions p1 = bumpy(500, 4);
  const Positions p2 = fps_sample(p1, 60).positions;
  const MetricsReport base = evaluate_pair(PointCloud(p1), PointCloud(p2));
  EXPECT_GT(base.sdm, 0.0);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 5; ++t) {
    const oracle::Rigid g = oracle::random_rigid(rng);
    const MetricsReport r = evaluate_pair(PointCloud(g.apply(p1)), PointCloud(g.apply(p2)));
    EXPECT_NEAR(r.cd, base.cd, 1e-8);
    EXPECT_NEAR(r.adaptive_cd, base.adaptive_cd, 1e-8);
    EXPECT_NEAR(r.ce, base.ce, 1e-8);
    EXPECT_NEAR(r.re, base.re, 1e-8);
    EXPECT_NEAR(r.nc, base.nc, 1e-8);
    EXPECT_NEAR(r.sdm, base.sdm, 1e-8);
  }
}

TEST(Metrics, CurvatureAndRoughnessErrorsMatchBruteForce) {
  const Positions p1 = bumpy(400, 5);
  const Positions p2 = random_sample(p1, 70, 2).positions;
  const auto d1 = compute_descriptors(p1, 20);
  const auto d2 = compute_descriptors(p2, 20);
  EXPECT_NEAR(curvature_error(p1, d1.mean_curvature, p2, d2.mean_curvature),
              brute_field_error(p1, d1.mean_curvature, p2, d2.mean_curvature), 1e-14);
  EXPECT_NEAR(roughness_error(p1, d1.roughness, p2, d2.roughness),
              brute_field_error(p1, d1.roughness, p2, d2.roughness), 1e-14);
}

TEST(Metrics, CurvatureErrorIsDirectional) {
  // P2 sits next to the first P1 point only. From P1 both points map onto it;
  // from P2 only the matching point is visited.
  const Positions p1{Vec3(0, 0, 0), Vec3(5, 0, 0)};
  const Positions p2{Vec3(0.1, 0, 0)};
  const std::vector<double> f1{0.1, 0.3};
  const std::vector<double> f2{0.1};
  EXPECT_NEAR(curvature_error(p1, f1, p2, f2), std::sqrt(0.04 / 2.0), 1e-15);
  EXPECT_EQ(curvature_error(p2, f2, p1, f1), 0.0);
}

TEST(Metrics, NormalsConsistency) {
  const Positions p1 = bumpy(300, 6);
  const Positions p2 = fps_sample(p1, 40).positions;
  const auto d1 = compute_descriptors(p1, 20);
  const auto d2 = compute_descriptors(p2, 20);
  const double nc = normals_consistency(p1, d1.normals, p2, d2.normals);
  EXPECT_NEAR(nc, brute_nc_direction(p1, d1.normals, p2, d2.normals) +
                      brute_nc_direction(p2, d2.normals, p1, d1.normals), 1e-13);
  EXPECT_NEAR(nc, normals_consistency(p2, d2.normals, p1, d1.normals), 1e-15);

  // Sign and length of normals do not matter; perpendicular normals score 1 per direction.
  const Positions a{Vec3::Zero()};
  EXPECT_EQ(normals_consistency(a, Positions{Vec3(0, 0, 2)}, a, Positions{Vec3(0, 0, -0.5)}), 0.0);
  EXPECT_NEAR(normals_consistency(a, Positions{Vec3::UnitX()}, a, Positions{Vec3::UnitY()}), 2.0, 1e-15);
}

TEST(Metrics, NormalsConsistencyErrors) {
  const Positions a{Vec3::Zero()};
  try {
    normals_consistency(a, Positions{Vec3(0, 0, 1e-13)}, a, Positions{Vec3::UnitZ()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroNormal);
  }
  try {
    normals_consistency(a, Positions{}, a, Positions{Vec3::UnitZ()});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(Sdm, LuminanceTermByHand) {
  const Positions p{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const auto d1 = two_point_descriptors(0.1, 0.1, 0.2, 0.1);
  const auto d2 = two_point_descriptors(0.1, 0.1, 0.05, 0.3);
  SdmConfig only_l;
  only_l.beta = 0.0;
  only_l.gamma = 0.0;
  const auto d = sdm_pointwise(p, d1, p, d2, only_l);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_NEAR(d[0], 0.15 / (0.2 + 1e-9), 1e-12);
  EXPECT_NEAR(d[1], 0.2 / (0.3 + 1e-9), 1e-12);
  EXPECT_NEAR(sdm(p, d1, p, d2, only_l), std::cbrt((std::pow(d[0], 3) + std::pow(d[1], 3)) / 2.0), 1e-12);
}

TEST(Sdm, ContrastTermByHand) {
  // Neighbor curvature 0.3 around mean 0.1 gives variance 0.04 in P1; P2 has
  // neighbor curvature equal to its mean and therefore zero variance.
  const Positions p{Vec3(0, 0, 0), Vec3(1, 0, 0)};
  const auto d1 = two_point_descriptors(0.1, 0.3, 0.1, 0.1);
  const auto d2 = two_point_descriptors(0.1, 0.1, 0.1, 0.1);
  SdmConfig only_c;
  only_c.alpha = 0.0;
  only_c.gamma = 0.0;
  const auto d = sdm_pointwise(p, d1, p, d2, only_c);
  EXPECT_NEAR(d[0], 0.2 / (0.1 + 1e-9), 1e-12);
  EXPECT_NEAR(d[1], 0.0, 1e-15);
}

TEST(Sdm, ConstantFieldsGiveZero) {
  const Positions p1 = oracle::random_cloud(50, 9);
  auto d1 = compute_descriptors(p1, 8);
  std::fill(d1.curvature.begin(), d1.curvature.end(), 0.07);
  std::fill(d1.mean_curvature.begin(), d1.mean_curvature.end(), 0.07);
  for (auto form : {SdmConfig::CovarianceForm::Covariance, SdmConfig::CovarianceForm::SquaredCovariance}) {
    SdmConfig c;
    c.covariance_form = form;
    for (double v : sdm_pointwise(p1, d1, p1, d1, c)) EXPECT_EQ(v, 0.0);
  }
}

TEST(Sdm, SquaredCovarianceIsNotZeroOnIdenticalClouds) {
  const Positions p = bumpy(400, 10);
  const auto d = compute_descriptors(p, 20);
  SdmConfig squared;
  squared.covariance_form = SdmConfig::CovarianceForm::SquaredCovariance;
  EXPECT_EQ(sdm(p, d, p, d, SdmConfig{}), 0.0);
  EXPECT_GT(sdm(p, d, p, d, squared), 0.1);
}

TEST(Sdm, BoundedPerPointValues) {
  const Positions p1 = bumpy(500, 11);
  const Positions p2 = random_sample(p1, 50, 1).positions;
  const auto d1 = compute_descriptors(p1, 20);
  const auto d2 = compute_descriptors(p2, 20);
  for (double v : sdm_pointwise(p1, d1, p2, d2, SdmConfig{})) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
}

TEST(Sdm, ConfigValidation) {
  SdmConfig c;
  c.alpha = c.beta = c.gamma = 0.0;
  EXPECT_THROW(c.validate(), Error);
  SdmConfig p;
  p.pooling_exponent = 0.5;
  EXPECT_THROW(p.validate(), Error);
}

TEST(MinkowskiPool, PowerMeanProperties) {
  EXPECT_EQ(minkowski_pool(std::vector<double>{}, 3.0), 0.0);
  EXPECT_NEAR(minkowski_pool(std::vector<double>{0.4, 0.4, 0.4}, 3.0), 0.4, 1e-15);
  EXPECT_NEAR(minkowski_pool(std::vector<double>{1.0, 3.0}, 1.0), 2.0, 1e-15);
  EXPECT_NEAR(minkowski_pool(std::vector<double>{1.0, 2.0}, 3.0), std::cbrt(4.5), 1e-15);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> v(1 + rng() % 30);
    for (double& x : v) x = u(rng);
    double last = 0.0;
    for (double p : {1.0, 2.0, 3.0, 5.0}) {
      const double m = minkowski_pool(v, p);
      EXPECT_GE(m, last - 1e-15);
      EXPECT_LE(m, *std::max_element(v.begin(), v.end()) + 1e-15);
      last = m;
    }
  }
}

TEST(MetricsOutput, CsvAndRecord) {
  MetricsReport r;
  r.cd = 1.5;
  r.ratio = 0.1;
  EXPECT_EQ(metrics_csv_header(), "cd,adaptive_cd,ce,re,nc,sdm,ratio,wall_time_ms");
  EXPECT_EQ(metrics_csv_row(r), "1.5,0,0,0,0,0,0.1,0");
  const std::string rec = metrics_record(r);
  EXPECT_NE(rec.find("cd: 1.5\n"), std::string::npos);
  EXPECT_NE(rec.find("wall_time_ms: 0\n"), std::string::npos);
}
