#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "pcsimp/backward.hpp"
#include "pcsimp/descriptors.hpp"
#include "pcsimp/error.hpp"
#include "pcsimp/knn.hpp"
#include "pcsimp/losses.hpp"
#include "pcsimp/model.hpp"
#include "pcsimp/network.hpp"
#include "pcsimp/sampling.hpp"
#include "support/oracles.hpp"

using namespace pcs;

namespace {

NetworkParameters perturbed(std::uint64_t seed) {
  // Non-identity batch norm and nonzero biases so every code path is exercised.
  NetworkParameters p = init_parameters(ModelConfig{}, seed);
  std::mt19937_64 rng(seed + 100);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (auto& bn : p.bn) {
    for (auto& v : bn.scale.reshaped()) v += u(rng);
    for (auto& v : bn.shift.reshaped()) v = u(rng);
    for (auto& v : bn.running_mean.reshaped()) v = u(rng);
    for (auto& v : bn.running_var.reshaped()) v = 1.0 + u(rng);
  }
  for (auto& d : p.mlp)
    for (auto& v : d.bias.reshaped()) v = u(rng);
  for (auto& v : p.gnn_bias.reshaped()) v = u(rng);
  for (auto& d : p.phi)
    for (auto& v : d.bias.reshaped()) v = u(rng);
  for (auto& d : p.gamma)
    for (auto& v : d.bias.reshaped()) v = u(rng);
  return p;
}

bool same_values(const NetworkParameters& a, const NetworkParameters& b) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  if (ta.size() != tb.size()) return false;
  for (std::size_t t = 0; t < ta.size(); ++t)
    if (!std::equal(ta[t].values.begin(), ta[t].values.end(), tb[t].values.begin(), tb[t].values.end()))
      return false;
  return true;
}

// Large enough to keep roundoff below 1e-4 relative on micro-scale gradients.
constexpr double kStep = 1e-5;

double dot(const Positions& a, const Positions& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i].dot(b[i]);
  return s;
}

}  // namespace

TEST(Network, InitIsDeterministicAndGlorotBounded) {
  const NetworkParameters a = init_parameters(ModelConfig{}, 5);
  const NetworkParameters b = init_parameters(ModelConfig{}, 5);
  const NetworkParameters c = init_parameters(ModelConfig{}, 6);
  EXPECT_TRUE(same_values(a, b));
  EXPECT_FALSE(same_values(a, c));
  EXPECT_NO_THROW(validate_parameters(a));

  EXPECT_NEAR(glorot_bound(64, 64), std::sqrt(6.0 / 128.0), 1e-15);
  ASSERT_EQ(a.mlp[1].weight.rows(), 64);
  ASSERT_EQ(a.mlp[1].weight.cols(), 64);
  EXPECT_LE(a.mlp[1].weight.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 128.0));
  EXPECT_GT(a.mlp[1].weight.cwiseAbs().maxCoeff(), 0.9 * std::sqrt(6.0 / 128.0));
  EXPECT_EQ(a.mlp[0].weight.cols(), 3);
  for (const auto& d : a.mlp) EXPECT_EQ(d.bias.cwiseAbs().maxCoeff(), 0.0);
  for (const auto& bn : a.bn) {
    EXPECT_EQ(bn.scale, Eigen::VectorXd::Ones(64));
    EXPECT_EQ(bn.shift, Eigen::VectorXd::Zero(64));
    EXPECT_EQ(bn.running_var, Eigen::VectorXd::Ones(64));
  }
  ASSERT_EQ(a.phi.size(), 1u);
  EXPECT_EQ(a.phi[0].in(), 67u);
  EXPECT_EQ(a.phi[0].out(), 3u);
  ASSERT_EQ(a.gamma.size(), 1u);
  EXPECT_EQ(a.gamma[0].in(), 3u);
  EXPECT_EQ(a.attn_query.rows(), 64);
  EXPECT_EQ(a.attn_query.cols(), 3);
}

TEST(Network, ZerosLikeAndValidation) {
  const NetworkParameters a = init_parameters(ModelConfig{}, 1);
  const NetworkParameters z = zeros_like(a);
  for (const auto& t : z.tensors())
    for (double v : t.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(z.learnable_size(), a.learnable_size());
  NetworkParameters bad = a;
  bad.bn[0].running_var[0] = -1.0;
  EXPECT_THROW(validate_parameters(bad), Error);
  NetworkParameters nan = a;
  nan.gnn_bias[0] = std::nan("");
  EXPECT_THROW(validate_parameters(nan), Error);
}

TEST(Model, ZeroNeighborWeightsMakeFeaturesPointwise) {
  NetworkParameters p = perturbed(2);
  p.gnn_neighbor.setZero();
  Positions pts = oracle::random_cloud(40, 3);
  const NeighborGraph g = build_knn(pts, 10);
  const LatentCloud a = projector_forward(pts, g, p, Mode::Eval);
  pts[7] += Vec3(0.3, -0.2, 0.1);
  const LatentCloud b = projector_forward(pts, g, p, Mode::Eval);
  for (Eigen::Index i = 0; i < 40; ++i) {
    if (i == 7) continue;
    EXPECT_EQ(a.features.row(i), b.features.row(i));
  }
  EXPECT_NE(a.features.row(7), b.features.row(7));
}

TEST(Model, ZeroGammaOutputKeepsCenters) {
  NetworkParameters p = perturbed(4);
  p.gamma.back().weight.setZero();
  p.gamma.back().bias.setZero();
  const Positions pts = oracle::random_cloud(60, 5);
  const LearnedSimplification s = simplify_learned(pts, 12, p);
  ASSERT_EQ(s.positions.size(), 12u);
  for (std::size_t c = 0; c < 12; ++c) EXPECT_EQ(s.positions[c], pts[s.center_indices[c]]);
}

TEST(Model, AttentionIsASoftmax) {
  const NetworkParameters p = perturbed(6);
  const Positions pts = oracle::random_cloud(50, 7);
  const CenterGraph cg = build_center_graph(pts, {0, 9, 30}, 15);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto w = attention_weights(pts, cg, p, c);
    ASSERT_EQ(w.size(), 15u);
    for (double v : w) EXPECT_GT(v, 0.0);
    EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
    for (Index j : cg.neighbors.neighbors(c)) EXPECT_NE(j, cg.center_indices[c]);
  }
}

TEST(Model, LatentFpsOnPaddedCoordinatesMatchesXyzFps) {
  const Positions pts = oracle::random_cloud(80, 8);
  LatentCloud latent;
  latent.features = RowMatrix::Zero(80, 64);
  for (Eigen::Index i = 0; i < 80; ++i) latent.features.row(i).head<3>() = pts[i].transpose();
  EXPECT_EQ(select_centers(latent, 20, 3), fps_sample(pts, 20, 3).indices);
}

TEST(Model, PermutationEquivariance) {
  const NetworkParameters p = perturbed(9);
  const Positions pts = oracle::random_cloud(70, 10);
  std::vector<Index> perm(70);
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(11));
  Positions shuffled(70);
  for (std::size_t i = 0; i < 70; ++i) shuffled[i] = pts[perm[i]];
  const std::size_t start = 4;
  const std::size_t shuffled_start = std::find(perm.begin(), perm.end(), start) - perm.begin();

  const auto a = simplify_learned(pts, 10, p, nullptr, start);
  const auto b = simplify_learned(shuffled, 10, p, nullptr, shuffled_start);
  ASSERT_EQ(a.positions.size(), b.positions.size());
  for (std::size_t c = 0; c < a.positions.size(); ++c) {
    EXPECT_EQ(perm[b.center_indices[c]], a.center_indices[c]);
    EXPECT_LT((a.positions[c] - b.positions[c]).norm(), 1e-12);
  }
}

TEST(Model, EvalIsPureAndTrainUpdatesOnlyRunningStats) {
  const NetworkParameters p = perturbed(12);
  const NetworkParameters before = p;
  const Positions pts = oracle::random_cloud(50, 13);
  const auto a = simplify_learned(pts, 8, p);
  const auto b = simplify_learned(pts, 8, p);
  EXPECT_EQ(a.center_indices, b.center_indices);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_TRUE(same_values(p, before));

  NetworkParameters q = p;
  ProjectorCache cache;
  projector_forward(pts, build_knn(pts, 10), q, Mode::Train, &cache);
  EXPECT_TRUE(same_values(q, before));
  update_running_stats(q, cache);
  EXPECT_NE(q.bn[0].running_mean, before.bn[0].running_mean);
  EXPECT_EQ(q.mlp[0].weight, before.mlp[0].weight);
  // Running mean moves 10% of the way toward the batch mean.
  EXPECT_NEAR(q.bn[0].running_mean[0], 0.9 * before.bn[0].running_mean[0] + 0.1 * cache.mean[0][0], 1e-12);
}

TEST(Model, ConnectivityUsesMeshWhenGiven) {
  const NetworkParameters p = init_parameters(ModelConfig{}, 0);
  const Mesh m{{Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(1, 1, 0)}, {{0, 1, 2}, {1, 3, 2}}};
  const NeighborGraph g = projector_connectivity(m.positions, p, &m);
  EXPECT_EQ(g.neighbors(0).size(), 2u);
  EXPECT_EQ(g.neighbors(1).size(), 3u);
  const NeighborGraph k = projector_connectivity(m.positions, p);
  EXPECT_EQ(k.neighbors(0).size(), 3u);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  const NetworkParameters p = perturbed(14);
  const Positions pts = oracle::random_cloud(32, 15);
  const NeighborGraph g = build_knn(pts, 20);
  const PipelineTrace trace = pipeline_forward(pts, g, p, 4, 0, Mode::Train);
  const NetworkParameters grads = pipeline_backward(trace, p, Positions(4, Vec3::Zero()));
  for (const auto& t : grads.tensors())
    for (double v : t.values) EXPECT_EQ(v, 0.0);
}

TEST(Backward, StaleTraceIsRejected) {
  NetworkParameters p = perturbed(16);
  const Positions pts = oracle::random_cloud(32, 17);
  const PipelineTrace trace = pipeline_forward(pts, build_knn(pts, 20), p, 4, 0, Mode::Eval);
  ++p.generation;
  try {
    pipeline_backward(trace, p, Positions(4, Vec3::UnitX()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::StaleTrace);
  }
}

// Central differences of <output, v> with the center selection frozen.
class PipelineGradient : public ::testing::TestWithParam<Mode> {};

TEST_P(PipelineGradient, MatchesFiniteDifferences) {
  const Mode mode = GetParam();
  NetworkParameters p = perturbed(18);
  const Positions pts = oracle::random_cloud(32, 19);
  const NeighborGraph g = build_knn(pts, 20);
  const PipelineTrace trace = pipeline_forward(pts, g, p, 4, 0, mode);

  std::mt19937_64 rng(20);
  std::normal_distribution<double> n01(0.0, 1.0);
  Positions v(4);
  for (Vec3& x : v) x = Vec3(n01(rng), n01(rng), n01(rng));
  const NetworkParameters grads = pipeline_backward(trace, p, v);

  auto objective = [&] { return dot(pipeline_forward_frozen(pts, g, p, trace.centers, mode).output, v); };
  auto tp = p.tensors();
  const auto tg = grads.tensors();
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t t = 0; t < tp.size(); ++t) {
    for (std::size_t i = 0; i < tp[t].values.size(); ++i) {
      if (!tp[t].learnable) {
        EXPECT_EQ(tg[t].values[i], 0.0) << tp[t].name;
        continue;
      }
      const double numeric = oracle::central_difference(objective, tp[t].values[i], kStep);
      const double err = oracle::relative_error(tg[t].values[i], numeric);
      worst = std::max(worst, err);
      ++checked;
      EXPECT_LE(err, 1e-4) << tp[t].name << "[" << i << "] analytic " << tg[t].values[i] << " numeric "
                           << numeric;
    }
  }
  EXPECT_EQ(checked, p.learnable_size());
  RecordProperty("worst_relative_error", std::to_string(worst));
}

INSTANTIATE_TEST_SUITE_P(Modes, PipelineGradient, ::testing::Values(Mode::Train, Mode::Eval),
                         [](const auto& info) { return info.param == Mode::Train ? "Train" : "Eval"; });

TEST(Backward, LossGradientChainsThroughPipeline) {
  NetworkParameters p = perturbed(21);
  const Positions pts = oracle::random_cloud(32, 22);
  const NeighborGraph g = build_knn(pts, 20);
  LossConfig lc;
  lc.descriptor_k = 3;
  const SurfaceDescriptors ref = compute_descriptors(pts, 20);
  const auto w = curvature_weights(ref.mean_curvature, lc);
  const PipelineTrace trace = pipeline_forward(pts, g, p, 6, 0, Mode::Train);
  const LossStructure s = loss_structure(pts, trace.output, lc);
  const LossValue value = evaluate_total_loss(pts, ref.mean_curvature, w, trace.output, s, lc, true);
  const NetworkParameters grads = pipeline_backward(trace, p, value.gradient);

  auto objective = [&] {
    const Positions out = pipeline_forward_frozen(pts, g, p, trace.centers, Mode::Train).output;
    return evaluate_total_loss(pts, ref.mean_curvature, w, out, s, lc, false).total;
  };
  auto tp = p.tensors();
  const auto tg = grads.tensors();
  // Spot-check a spread of entries in every learnable tensor. The descriptor
  // pass has kinks within 1e-5 of some entries, while 1e-6 is roundoff-limited
  // on the smallest gradients, so the closer of the two steps is taken.
  for (std::size_t t = 0; t < tp.size(); ++t) {
    if (!tp[t].learnable) continue;
    const std::size_t n = tp[t].values.size();
    for (std::size_t i = 0; i < n; i += std::max<std::size_t>(1, n / 7)) {
      double err = std::numeric_limits<double>::infinity();
      for (double h : {1e-5, 1e-6})
        err = std::min(err, oracle::relative_error(tg[t].values[i],
                                                   oracle::central_difference(objective, tp[t].values[i], h)));
      EXPECT_LE(err, 1e-4) << tp[t].name << "[" << i << "]";
    }
  }
}
