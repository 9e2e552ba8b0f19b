#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pcsimp/geometry.hpp"

namespace pcs {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Fully connected layer y = W x + b with W stored out x in.
struct Dense {
  RowMatrix weight;
  Eigen::VectorXd bias;

  std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
};

struct BatchNorm {
  Eigen::VectorXd scale;
  Eigen::VectorXd shift;
  Eigen::VectorXd running_mean;
  Eigen::VectorXd running_var;
};

/// Architecture hyper-parameters, stored alongside the weights in checkpoints.
struct ModelConfig {
  std::size_t latent_dim = 64;
  std::size_t graph_k = 20;
  std::size_t center_k = 15;
  std::size_t d_attn = 64;
  std::vector<std::size_t> phi_hidden;
  std::vector<std::size_t> gamma_hidden;
  std::size_t descriptor_k = 20;
  BandwidthPolicy bandwidth;
  std::uint64_t seed = 0;
};

struct TensorRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<double> values;
  bool learnable = true;
};

struct ConstTensorRef {
  std::string name;
  std::vector<std::size_t> shape;
  std::span<const double> values;
  bool learnable = true;
};

/// All tensors of the projector (point-wise MLP with batch norm, one GNN layer)
/// and of the attention-based refinement layer.
struct NetworkParameters {
  static constexpr std::uint32_t kFormatVersion = 1;

  ModelConfig config;
  std::array<Dense, 3> mlp;
  std::array<BatchNorm, 3> bn;
  RowMatrix gnn_self;
  RowMatrix gnn_neighbor;
  Eigen::VectorXd gnn_bias;
  std::vector<Dense> phi;    // ReLU after every layer
  std::vector<Dense> gamma;  // ReLU between layers, linear output
  RowMatrix attn_query;      // d_attn x 3
  RowMatrix attn_key;        // d_attn x 3

  /// Incremented whenever learnable values change through the optimizer.
  std::uint64_t generation = 0;

  /// Every tensor in canonical (serialization) order.
  std::vector<TensorRef> tensors();
  std::vector<ConstTensorRef> tensors() const;

  std::size_t learnable_size() const;
};

/// Glorot-uniform weights, zero biases, identity batch norm; deterministic per seed.
NetworkParameters init_parameters(const ModelConfig& config, std::uint64_t seed);

/// Same shapes, every value zero. Used for gradients and optimizer moments.
NetworkParameters zeros_like(const NetworkParameters& params);

/// Checks shape consistency, finiteness and positive running variances.
/// Throws IncompatibleCheckpoint.
void validate_parameters(const NetworkParameters& params);

double glorot_bound(std::size_t fan_in, std::size_t fan_out);

}  // namespace pcs
