#include "pcsimp/backward.hpp"

#include <cmath>

#include "pcsimp/error.hpp"

namespace pcs {

namespace {

RowMatrix relu_mask(const RowMatrix& pre) { return (pre.array() > 0.0).cast<double>().matrix(); }

// Backward through a dense stack; returns d loss / d stack input.
RowMatrix dense_stack_backward(const std::vector<Dense>& layers, std::vector<Dense>& grads,
                               const RowMatrix& input, const std::vector<RowMatrix>& pre,
                               const std::vector<RowMatrix>& act, RowMatrix d_out, bool relu_last) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const bool last = l + 1 == layers.size();
    if (!last || relu_last) d_out = d_out.cwiseProduct(relu_mask(pre[l]));
    const RowMatrix& in = l == 0 ? input : act[l - 1];
    grads[l].weight += d_out.transpose() * in;
    grads[l].bias += d_out.colwise().sum().transpose();
    d_out = d_out * layers[l].weight;
  }
  return d_out;
}

}  // namespace

PipelineTrace pipeline_forward_frozen(std::span<const Vec3> positions, const NeighborGraph& connectivity,
                                      const NetworkParameters& params, const CenterGraph& centers,
                                      Mode mode) {
  PipelineTrace t;
  t.generation = params.generation;
  t.input.assign(positions.begin(), positions.end());
  t.latent = projector_forward(positions, connectivity, params, mode, &t.projector);
  t.centers = centers;
  t.output = attention_refine(positions, t.latent, t.centers, params, &t.refine);
  return t;
}

PipelineTrace pipeline_forward(std::span<const Vec3> positions, const NeighborGraph& connectivity,
                               const NetworkParameters& params, std::size_t m, std::size_t start,
                               Mode mode) {
  PipelineTrace t;
  t.generation = params.generation;
  t.input.assign(positions.begin(), positions.end());
  t.latent = projector_forward(positions, connectivity, params, mode, &t.projector);
  t.centers = build_center_graph(positions, select_centers(t.latent, m, start), params.config.center_k);
  t.output = attention_refine(positions, t.latent, t.centers, params, &t.refine);
  return t;
}

NetworkParameters pipeline_backward(const PipelineTrace& trace, const NetworkParameters& params,
                                    std::span<const Vec3> output_grad) {
  if (trace.generation != params.generation)
    throw Error(ErrorCode::StaleTrace, "parameters changed after the forward pass");
  const auto m = static_cast<Eigen::Index>(trace.centers.center_indices.size());
  if (output_grad.size() != static_cast<std::size_t>(m))
    throw Error(ErrorCode::ShapeMismatch, "output gradient does not match the centers");

  NetworkParameters grads = zeros_like(params);
  const RefineCache& rc = trace.refine;
  const auto& centers = trace.centers;
  const auto& pos = trace.input;

  RowMatrix d_out(m, 3);
  for (Eigen::Index c = 0; c < m; ++c) d_out.row(c) = output_grad[static_cast<std::size_t>(c)].transpose();

  const RowMatrix d_pooled =
      dense_stack_backward(params.gamma, grads.gamma, rc.pooled, rc.gamma_pre, rc.gamma_act, d_out, false);

  const RowMatrix& u = rc.phi_act.back();
  const auto rows = u.rows();
  RowMatrix d_u = RowMatrix::Zero(rows, 3);
  const double scale = 1.0 / std::sqrt(static_cast<double>(params.config.d_attn));
  for (Eigen::Index c = 0; c < m; ++c) {
    const auto begin = static_cast<Eigen::Index>(centers.neighbors.offsets[static_cast<std::size_t>(c)]);
    const auto end = static_cast<Eigen::Index>(centers.neighbors.offsets[static_cast<std::size_t>(c) + 1]);
    if (begin == end) continue;
    const double inv_n = 1.0 / static_cast<double>(end - begin);
    const Vec3& pc = pos[centers.center_indices[static_cast<std::size_t>(c)]];

    double weighted = 0.0;
    std::vector<double> d_alpha(static_cast<std::size_t>(end - begin));
    for (Eigen::Index r = begin; r < end; ++r) {
      d_u.row(r) = rc.attention[r] * inv_n * d_pooled.row(c);
      const double da = inv_n * u.row(r).dot(d_pooled.row(c));
      d_alpha[static_cast<std::size_t>(r - begin)] = da;
      weighted += rc.attention[r] * da;
    }
    Eigen::RowVectorXd d_key = Eigen::RowVectorXd::Zero(rc.keys.cols());
    for (Eigen::Index r = begin; r < end; ++r) {
      const double d_logit = rc.attention[r] * (d_alpha[static_cast<std::size_t>(r - begin)] - weighted) * scale;
      const Vec3& pj = pos[centers.neighbors.indices[static_cast<std::size_t>(r)]];
      grads.attn_query += (d_logit * rc.keys.row(c)).transpose() * pj.transpose();
      d_key += d_logit * rc.queries.row(r);
    }
    grads.attn_key += d_key.transpose() * pc.transpose();
  }

  const RowMatrix d_inputs =
      dense_stack_backward(params.phi, grads.phi, rc.inputs, rc.phi_pre, rc.phi_act, d_u, true);

  const ProjectorCache& pc = trace.projector;
  const Eigen::Index latent_dim = trace.latent.features.cols();
  RowMatrix d_latent = RowMatrix::Zero(trace.latent.features.rows(), latent_dim);
  for (Eigen::Index r = 0; r < rows; ++r)
    d_latent.row(centers.neighbors.indices[static_cast<std::size_t>(r)]) += d_inputs.row(r).head(latent_dim);

  const RowMatrix d_gnn = d_latent.cwiseProduct(relu_mask(pc.gnn_pre));
  const RowMatrix& f = pc.activated[2];
  grads.gnn_self = d_gnn.transpose() * f;
  grads.gnn_neighbor = d_gnn.transpose() * pc.aggregated;
  grads.gnn_bias = d_gnn.colwise().sum().transpose();

  RowMatrix d_f = d_gnn * params.gnn_self;
  const RowMatrix via_neighbors = d_gnn * params.gnn_neighbor;
  const NeighborGraph& graph = trace.latent.source_graph;
  for (std::size_t i = 0; i < graph.size(); ++i) {
    const auto nbrs = graph.neighbors(i);
    if (nbrs.empty()) continue;
    const double inv = 1.0 / static_cast<double>(nbrs.size());
    for (Index j : nbrs) d_f.row(j) += inv * via_neighbors.row(static_cast<Eigen::Index>(i));
  }

  const double n = static_cast<double>(pc.input.rows());
  for (std::size_t l = 3; l-- > 0;) {
    const RowMatrix d_y = d_f.cwiseProduct(relu_mask(pc.activated[l]));
    const RowMatrix& xhat = pc.normalized[l];
    grads.bn[l].scale = d_y.cwiseProduct(xhat).colwise().sum().transpose();
    grads.bn[l].shift = d_y.colwise().sum().transpose();
    const RowMatrix d_xhat = (d_y.array().rowwise() * params.bn[l].scale.transpose().array()).matrix();
    RowMatrix d_z;
    if (pc.mode == Mode::Train) {
      const Eigen::RowVectorXd mean_d = d_xhat.colwise().sum() / n;
      const Eigen::RowVectorXd mean_dx = d_xhat.cwiseProduct(xhat).colwise().sum() / n;
      d_z = ((d_xhat.rowwise() - mean_d).array() - xhat.array().rowwise() * mean_dx.array()).matrix();
    } else {
      d_z = d_xhat;
    }
    d_z = (d_z.array().rowwise() * pc.inv_std[l].transpose().array()).matrix();
    const RowMatrix& in = l == 0 ? pc.input : pc.activated[l - 1];
    grads.mlp[l].weight = d_z.transpose() * in;
    grads.mlp[l].bias = d_z.colwise().sum().transpose();
    if (l > 0) d_f = d_z * params.mlp[l].weight;
  }
  return grads;
}

}  // namespace pcs
