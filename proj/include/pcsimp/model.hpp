#pragma once

#include <array>
#include <span>
#include <vector>

#include "pcsimp/geometry.hpp"
#include "pcsimp/network.hpp"

namespace pcs {

enum class Mode { Train, Eval };

inline constexpr double kBatchNormEpsilon = 1e-5;

/// Per-point latent features plus the graph the GNN aggregated over.
struct LatentCloud {
  RowMatrix features;  // N x latent_dim
  NeighborGraph source_graph;
};

/// Intermediates of projector_forward needed by the backward pass.
struct ProjectorCache {
  RowMatrix input;
  std::array<RowMatrix, 3> pre;
  std::array<RowMatrix, 3> normalized;
  std::array<RowMatrix, 3> activated;
  std::array<Eigen::VectorXd, 3> mean;
  std::array<Eigen::VectorXd, 3> var;
  std::array<Eigen::VectorXd, 3> inv_std;
  RowMatrix aggregated;
  RowMatrix gnn_pre;
  Mode mode = Mode::Eval;
};

/// Point-wise MLP (3 x dense + batch norm + ReLU) followed by one ReLU GNN layer
///   f'_i = W_self f_i + mean_{j in N(i)} W_neighbor f_j + b.
/// Train mode normalizes with batch statistics over the whole cloud; eval mode
/// uses the running statistics. Parameters are never modified here.
LatentCloud projector_forward(std::span<const Vec3> positions, const NeighborGraph& connectivity,
                              const NetworkParameters& params, Mode mode,
                              ProjectorCache* cache = nullptr);

/// Folds the batch statistics of a train-mode pass into the running estimates.
void update_running_stats(NetworkParameters& params, const ProjectorCache& cache,
                          double momentum = 0.1);

/// Farthest point sampling over latent rows.
std::vector<Index> select_centers(const LatentCloud& latent, std::size_t m, std::size_t start = 0);

/// Selected centers and their k nearest input points (center excluded).
struct CenterGraph {
  std::vector<Index> center_indices;
  NeighborGraph neighbors;  // one list per center
};

CenterGraph build_center_graph(std::span<const Vec3> positions, std::vector<Index> centers,
                               std::size_t k);

struct RefineCache {
  RowMatrix inputs;  // [f_j | p_j - p_c], one row per (center, neighbor)
  std::vector<RowMatrix> phi_pre;
  std::vector<RowMatrix> phi_act;
  RowMatrix queries;  // theta_q(p_j) per row
  RowMatrix keys;     // theta_k(p_c) per center
  Eigen::VectorXd attention;
  RowMatrix pooled;  // per center: mean_j alpha_j phi(.)
  std::vector<RowMatrix> gamma_pre;
  std::vector<RowMatrix> gamma_act;
};

/// p'_c = p_c + gamma( mean_j alpha_j phi([f_j | p_j - p_c]) ), with alpha the
/// softmax over each center's list of theta_q(p_j) . theta_k(p_c) / sqrt(d).
Positions attention_refine(std::span<const Vec3> positions, const LatentCloud& latent,
                           const CenterGraph& centers, const NetworkParameters& params,
                           RefineCache* cache = nullptr);

/// Attention weights of one center, in neighbor-list order.
std::vector<double> attention_weights(std::span<const Vec3> positions, const CenterGraph& centers,
                                      const NetworkParameters& params, std::size_t center);

/// GNN connectivity: mesh 1-ring when a mesh is given, otherwise k-NN with graph_k.
NeighborGraph projector_connectivity(std::span<const Vec3> positions, const NetworkParameters& params,
                                     const Mesh* mesh = nullptr);

struct LearnedSimplification {
  std::vector<Index> center_indices;  // FPS order, before refinement
  Positions positions;                // refined, same order
};

/// Full eval-mode pipeline. `connectivity` defaults to projector_connectivity().
LearnedSimplification simplify_learned(std::span<const Vec3> positions, std::size_t m,
                                       const NetworkParameters& params,
                                       const NeighborGraph* connectivity = nullptr,
                                       std::size_t start = 0);

}  // namespace pcs
