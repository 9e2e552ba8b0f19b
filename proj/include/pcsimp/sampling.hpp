#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcsimp/geometry.hpp"

namespace pcs {

/// Output of a subset-selecting simplifier.
struct SelectionResult {
  std::vector<Index> indices;
  Positions positions;
};

/// Read-only view of N feature rows of equal dimension, stored row-major.
struct FeatureView {
  std::span<const double> data;
  std::size_t dim = 0;

  std::size_t rows() const { return dim == 0 ? 0 : data.size() / dim; }
  const double* row(std::size_t i) const { return data.data() + i * dim; }
};

FeatureView feature_view(std::span<const Vec3> points);

/// Output size for a ratio in (0, 1]: round(ratio * n), at least 1.
std::size_t target_count(std::size_t n, double ratio);

/// m distinct indices drawn uniformly without replacement, ascending.
SelectionResult random_sample(std::span<const Vec3> points, std::size_t m, std::uint64_t seed);

/// Greedy max-min selection in feature space. The first pick is `start`;
/// every next pick maximizes the distance to the picked set, lowest index on ties.
std::vector<Index> farthest_point_sampling(const FeatureView& features, std::size_t m,
                                           std::size_t start = 0);

SelectionResult fps_sample(std::span<const Vec3> points, std::size_t m, std::size_t start = 0);

/// Indices of the m largest mean-curvature values, ties broken by ascending index.
SelectionResult tcp_sample(std::span<const Vec3> points, std::span<const double> mean_curvature,
                           std::size_t m);

Positions gather(std::span<const Vec3> points, std::span<const Index> indices);

}  // namespace pcs
