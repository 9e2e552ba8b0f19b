#include "pcsimp/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "pcsimp/error.hpp"

namespace pcs {

namespace {

void check_count(std::size_t m, std::size_t n) {
  if (m < 1 || m > n)
    throw Error(ErrorCode::BadRatio,
                "requested " + std::to_string(m) + " of " + std::to_string(n) + " points");
}

}  // namespace

FeatureView feature_view(std::span<const Vec3> points) {
  static_assert(sizeof(Vec3) == 3 * sizeof(double));
  return {{points.empty() ? nullptr : points.front().data(), points.size() * 3}, 3};
}

std::size_t target_count(std::size_t n, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0))
    throw Error(ErrorCode::BadRatio, "ratio must lie in (0, 1], got " + std::to_string(ratio));
  const auto m = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  return std::clamp<std::size_t>(m, 1, std::max<std::size_t>(n, 1));
}

Positions gather(std::span<const Vec3> points, std::span<const Index> indices) {
  Positions out;
  out.reserve(indices.size());
  for (Index i : indices) out.push_back(points[i]);
  return out;
}

SelectionResult random_sample(std::span<const Vec3> points, std::size_t m, std::uint64_t seed) {
  check_count(m, points.size());
  std::vector<Index> all(points.size());
  std::iota(all.begin(), all.end(), Index{0});
  SelectionResult out;
  out.indices.reserve(m);
  std::mt19937_64 rng(seed);
  std::sample(all.begin(), all.end(), std::back_inserter(out.indices), m, rng);
  out.positions = gather(points, out.indices);
  return out;
}

std::vector<Index> farthest_point_sampling(const FeatureView& features, std::size_t m,
                                           std::size_t start) {
  const std::size_t n = features.rows();
  if (features.dim == 0 || features.data.size() != n * features.dim)
    throw Error(ErrorCode::DimensionMismatch, "feature rows are not of equal dimension");
  check_count(m, n);
  if (start >= n) throw Error(ErrorCode::BadParams, "FPS start index out of range");

  const std::size_t dim = features.dim;
  // Picked points carry -1 so they never win the argmax, even against duplicates at 0.
  std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
  std::vector<Index> picked;
  picked.reserve(m);
  std::size_t current = start;
  for (std::size_t s = 0; s < m; ++s) {
    picked.push_back(static_cast<Index>(current));
    min_d2[current] = -1.0;
    if (s + 1 == m) break;

    const double* c = features.row(current);
    std::size_t best = n;
    double best_d2 = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double& md = min_d2[i];
      if (md < 0.0) continue;
      const double* r = features.row(i);
      double d2 = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        const double diff = r[a] - c[a];
        d2 += diff * diff;
      }
      if (d2 < md) md = d2;
      if (md > best_d2) {
        best_d2 = md;
        best = i;
      }
    }
    current = best;
  }
  return picked;
}

SelectionResult fps_sample(std::span<const Vec3> points, std::size_t m, std::size_t start) {
  SelectionResult out;
  out.indices = farthest_point_sampling(feature_view(points), m, start);
  out.positions = gather(points, out.indices);
  return out;
}

SelectionResult tcp_sample(std::span<const Vec3> points, std::span<const double> mean_curvature,
                           std::size_t m) {
  if (mean_curvature.size() != points.size())
    throw Error(ErrorCode::LengthMismatch, "curvature field differs from point count");
  check_count(m, points.size());
  std::vector<Index> order(points.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return mean_curvature[a] > mean_curvature[b]; });
  order.resize(m);
  SelectionResult out;
  out.indices = std::move(order);
  out.positions = gather(points, out.indices);
  return out;
}

}  // namespace pcs
