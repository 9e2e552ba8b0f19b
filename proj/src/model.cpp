#include "pcsimp/model.hpp"

#include <algorithm>
#include <cmath>

#include "pcsimp/error.hpp"
#include "pcsimp/knn.hpp"
#include "pcsimp/sampling.hpp"

namespace pcs {

namespace {

RowMatrix positions_matrix(std::span<const Vec3> positions) {
  RowMatrix m(static_cast<Eigen::Index>(positions.size()), 3);
  for (std::size_t i = 0; i < positions.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = positions[i].transpose();
  return m;
}

RowMatrix affine(const RowMatrix& x, const Dense& layer) {
  RowMatrix y = x * layer.weight.transpose();
  y.rowwise() += layer.bias.transpose();
  return y;
}

RowMatrix relu(const RowMatrix& x) { return x.cwiseMax(0.0); }

RowMatrix neighbor_mean(const RowMatrix& f, const NeighborGraph& graph) {
  RowMatrix out = RowMatrix::Zero(f.rows(), f.cols());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto nbrs = graph.neighbors(i);
    if (nbrs.empty()) continue;
    auto row = out.row(static_cast<Eigen::Index>(i));
    for (Index j : nbrs) row += f.row(j);
    row /= static_cast<double>(nbrs.size());
  }
  return out;
}

}  // namespace

LatentCloud projector_forward(std::span<const Vec3> positions, const NeighborGraph& connectivity,
                              const NetworkParameters& params, Mode mode, ProjectorCache* cache) {
  const auto n = static_cast<Eigen::Index>(positions.size());
  if (n == 0) throw Error(ErrorCode::EmptyCloud, "projector input is empty");
  if (connectivity.size() != positions.size())
    throw Error(ErrorCode::ShapeMismatch, "connectivity does not cover every point");
  if (mode == Mode::Train && n < 2)
    throw Error(ErrorCode::ShapeMismatch, "batch statistics need at least 2 points");

  ProjectorCache local;
  ProjectorCache& c = cache ? *cache : local;
  c.mode = mode;
  c.input = positions_matrix(positions);

  const RowMatrix* x = &c.input;
  for (std::size_t l = 0; l < 3; ++l) {
    c.pre[l] = affine(*x, params.mlp[l]);
    const BatchNorm& bn = params.bn[l];
    if (mode == Mode::Train) {
      c.mean[l] = c.pre[l].colwise().mean().transpose();
      c.var[l] = (c.pre[l].rowwise() - c.mean[l].transpose()).array().square().colwise().mean().transpose();
    } else {
      c.mean[l] = bn.running_mean;
      c.var[l] = bn.running_var;
    }
    c.inv_std[l] = (c.var[l].array() + kBatchNormEpsilon).rsqrt().matrix();
    c.normalized[l] = ((c.pre[l].rowwise() - c.mean[l].transpose()).array().rowwise() *
                       c.inv_std[l].transpose().array())
                          .matrix();
    RowMatrix y = (c.normalized[l].array().rowwise() * bn.scale.transpose().array()).matrix();
    y.rowwise() += bn.shift.transpose();
    c.activated[l] = relu(y);
    x = &c.activated[l];
  }

  c.aggregated = neighbor_mean(*x, connectivity);
  c.gnn_pre = *x * params.gnn_self.transpose() + c.aggregated * params.gnn_neighbor.transpose();
  c.gnn_pre.rowwise() += params.gnn_bias.transpose();

  LatentCloud latent;
  latent.features = relu(c.gnn_pre);
  latent.source_graph = connectivity;
  return latent;
}

void update_running_stats(NetworkParameters& params, const ProjectorCache& cache, double momentum) {
  if (cache.mode != Mode::Train) return;
  const double n = static_cast<double>(cache.input.rows());
  const double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
  for (std::size_t l = 0; l < 3; ++l) {
    BatchNorm& bn = params.bn[l];
    bn.running_mean = (1.0 - momentum) * bn.running_mean + momentum * cache.mean[l];
    bn.running_var = (1.0 - momentum) * bn.running_var + momentum * unbias * cache.var[l];
  }
}

std::vector<Index> select_centers(const LatentCloud& latent, std::size_t m, std::size_t start) {
  const FeatureView view{{latent.features.data(), static_cast<std::size_t>(latent.features.size())},
                         static_cast<std::size_t>(latent.features.cols())};
  return farthest_point_sampling(view, m, start);
}

CenterGraph build_center_graph(std::span<const Vec3> positions, std::vector<Index> centers,
                               std::size_t k) {
  if (positions.empty()) throw Error(ErrorCode::EmptyCloud, "center graph over an empty cloud");
  if (k == 0) throw Error(ErrorCode::BadParams, "center neighborhood size must be positive");
  const std::size_t kk = std::min(k, positions.size() - 1);
  CenterGraph g;
  g.neighbors.k = k;
  g.neighbors.offsets.assign(centers.size() + 1, 0);
  g.neighbors.indices.reserve(centers.size() * kk);
  const KdTree tree(positions);
  std::vector<Neighbor> found;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (centers[c] >= positions.size()) throw Error(ErrorCode::ShapeMismatch, "center index out of range");
    tree.knn(positions[centers[c]], kk, centers[c], found);
    for (const Neighbor& nb : found) g.neighbors.indices.push_back(nb.index);
    g.neighbors.offsets[c + 1] = g.neighbors.indices.size();
  }
  g.center_indices = std::move(centers);
  return g;
}

std::vector<double> attention_weights(std::span<const Vec3> positions, const CenterGraph& centers,
                                      const NetworkParameters& params, std::size_t center) {
  const auto nbrs = centers.neighbors.neighbors(center);
  const Eigen::VectorXd key = params.attn_key * positions[centers.center_indices[center]];
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.config.d_attn));
  std::vector<double> logits;
  for (Index j : nbrs) logits.push_back((params.attn_query * positions[j]).dot(key) * scale);
  if (logits.empty()) return logits;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) sum += (v = std::exp(v - top));
  for (double& v : logits) v /= sum;
  return logits;
}

Positions attention_refine(std::span<const Vec3> positions, const LatentCloud& latent,
                           const CenterGraph& centers, const NetworkParameters& params,
                           RefineCache* cache) {
  const auto& f = latent.features;
  if (static_cast<std::size_t>(f.rows()) != positions.size() ||
      static_cast<std::size_t>(f.cols()) != params.config.latent_dim)
    throw Error(ErrorCode::ShapeMismatch, "latent features do not match the cloud");
  if (centers.neighbors.size() != centers.center_indices.size())
    throw Error(ErrorCode::ShapeMismatch, "center graph lists do not match the centers");

  RefineCache local;
  RefineCache& c = cache ? *cache : local;
  const auto m = static_cast<Eigen::Index>(centers.center_indices.size());
  const auto rows = static_cast<Eigen::Index>(centers.neighbors.indices.size());
  const Eigen::Index latent_dim = f.cols();

  c.inputs.resize(rows, latent_dim + 3);
  RowMatrix neighbor_pos(rows, 3);
  RowMatrix center_pos(m, 3);
  for (Eigen::Index ci = 0; ci < m; ++ci) {
    const Vec3& pc = positions[centers.center_indices[static_cast<std::size_t>(ci)]];
    center_pos.row(ci) = pc.transpose();
    const std::size_t begin = centers.neighbors.offsets[static_cast<std::size_t>(ci)];
    const auto nbrs = centers.neighbors.neighbors(static_cast<std::size_t>(ci));
    for (std::size_t t = 0; t < nbrs.size(); ++t) {
      const auto r = static_cast<Eigen::Index>(begin + t);
      const Vec3& pj = positions[nbrs[t]];
      c.inputs.row(r).head(latent_dim) = f.row(nbrs[t]);
      c.inputs.row(r).tail<3>() = (pj - pc).transpose();
      neighbor_pos.row(r) = pj.transpose();
    }
  }

  c.phi_pre.clear();
  c.phi_act.clear();
  const RowMatrix* h = &c.inputs;
  for (const Dense& layer : params.phi) {
    c.phi_pre.push_back(affine(*h, layer));
    c.phi_act.push_back(relu(c.phi_pre.back()));
    h = &c.phi_act.back();
  }
  const RowMatrix& u = *h;

  c.queries = neighbor_pos * params.attn_query.transpose();
  c.keys = center_pos * params.attn_key.transpose();
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.config.d_attn));
  c.attention.resize(rows);
  c.pooled = RowMatrix::Zero(m, 3);
  for (Eigen::Index ci = 0; ci < m; ++ci) {
    const auto begin = static_cast<Eigen::Index>(centers.neighbors.offsets[static_cast<std::size_t>(ci)]);
    const auto end = static_cast<Eigen::Index>(centers.neighbors.offsets[static_cast<std::size_t>(ci) + 1]);
    if (begin == end) continue;
    double top = -std::numeric_limits<double>::infinity();
    for (Eigen::Index r = begin; r < end; ++r) {
      c.attention[r] = c.queries.row(r).dot(c.keys.row(ci)) * scale;
      top = std::max(top, c.attention[r]);
    }
    double sum = 0.0;
    for (Eigen::Index r = begin; r < end; ++r) sum += (c.attention[r] = std::exp(c.attention[r] - top));
    for (Eigen::Index r = begin; r < end; ++r) {
      c.attention[r] /= sum;
      c.pooled.row(ci) += c.attention[r] * u.row(r);
    }
    c.pooled.row(ci) /= static_cast<double>(end - begin);
  }

  c.gamma_pre.clear();
  c.gamma_act.clear();
  const RowMatrix* g = &c.pooled;
  for (std::size_t l = 0; l < params.gamma.size(); ++l) {
    c.gamma_pre.push_back(affine(*g, params.gamma[l]));
    const bool last = l + 1 == params.gamma.size();
    c.gamma_act.push_back(last ? c.gamma_pre.back() : relu(c.gamma_pre.back()));
    g = &c.gamma_act.back();
  }

  Positions out(static_cast<std::size_t>(m));
  for (Eigen::Index ci = 0; ci < m; ++ci)
    out[static_cast<std::size_t>(ci)] = center_pos.row(ci).transpose() + g->row(ci).transpose();
  return out;
}

NeighborGraph projector_connectivity(std::span<const Vec3> positions, const NetworkParameters& params,
                                     const Mesh* mesh) {
  if (mesh) {
    if (mesh->positions.size() != positions.size())
      throw Error(ErrorCode::ShapeMismatch, "mesh vertex count differs from the cloud");
    return mesh_neighbors(*mesh);
  }
  return build_knn(positions, params.config.graph_k);
}

LearnedSimplification simplify_learned(std::span<const Vec3> positions, std::size_t m,
                                       const NetworkParameters& params,
                                       const NeighborGraph* connectivity, std::size_t start) {
  if (positions.size() < 2) throw Error(ErrorCode::EmptyCloud, "learned simplification needs 2+ points");
  if (m < 1 || m > positions.size()) throw Error(ErrorCode::BadRatio, "target count out of range");
  NeighborGraph own;
  if (!connectivity) {
    own = projector_connectivity(positions, params);
    connectivity = &own;
  }
  const LatentCloud latent = projector_forward(positions, *connectivity, params, Mode::Eval);
  CenterGraph centers = build_center_graph(positions, select_centers(latent, m, start), params.config.center_k);
  LearnedSimplification out;
  out.positions = attention_refine(positions, latent, centers, params);
  out.center_indices = std::move(centers.center_indices);
  return out;
}

}  // namespace pcs
