#include "pcsimp/network.hpp"

#include <cmath>
#include <random>

#include "pcsimp/error.hpp"

namespace pcs {

namespace {

template <typename Ref, typename Params>
std::vector<Ref> collect(Params& p) {
  std::vector<Ref> out;
  auto mat = [&](const std::string& name, auto& m, bool learnable = true) {
    out.push_back({name,
                   {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                   {m.data(), static_cast<std::size_t>(m.size())},
                   learnable});
  };
  auto vec = [&](const std::string& name, auto& v, bool learnable = true) {
    out.push_back({name, {static_cast<std::size_t>(v.size())}, {v.data(), static_cast<std::size_t>(v.size())},
                   learnable});
  };
  for (std::size_t l = 0; l < p.mlp.size(); ++l) {
    const std::string prefix = "projector.mlp" + std::to_string(l);
    mat(prefix + ".weight", p.mlp[l].weight);
    vec(prefix + ".bias", p.mlp[l].bias);
    const std::string bn = "projector.bn" + std::to_string(l);
    vec(bn + ".scale", p.bn[l].scale);
    vec(bn + ".shift", p.bn[l].shift);
    vec(bn + ".running_mean", p.bn[l].running_mean, false);
    vec(bn + ".running_var", p.bn[l].running_var, false);
  }
  mat("projector.gnn.w_self", p.gnn_self);
  mat("projector.gnn.w_neighbor", p.gnn_neighbor);
  vec("projector.gnn.bias", p.gnn_bias);
  for (std::size_t l = 0; l < p.phi.size(); ++l) {
    mat("refine.phi" + std::to_string(l) + ".weight", p.phi[l].weight);
    vec("refine.phi" + std::to_string(l) + ".bias", p.phi[l].bias);
  }
  for (std::size_t l = 0; l < p.gamma.size(); ++l) {
    mat("refine.gamma" + std::to_string(l) + ".weight", p.gamma[l].weight);
    vec("refine.gamma" + std::to_string(l) + ".bias", p.gamma[l].bias);
  }
  mat("refine.attn.query", p.attn_query);
  mat("refine.attn.key", p.attn_key);
  return out;
}

Dense make_dense(std::size_t in, std::size_t out) {
  return {RowMatrix::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in)),
          Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))};
}

std::vector<Dense> make_stack(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<Dense> layers;
  std::size_t width = in;
  for (std::size_t h : hidden) {
    layers.push_back(make_dense(width, h));
    width = h;
  }
  layers.push_back(make_dense(width, out));
  return layers;
}

NetworkParameters allocate(const ModelConfig& c) {
  if (c.latent_dim == 0 || c.d_attn == 0 || c.center_k == 0 || c.graph_k == 0)
    throw Error(ErrorCode::BadParams, "model dimensions must be positive");
  const auto d = static_cast<Eigen::Index>(c.latent_dim);
  NetworkParameters p;
  p.config = c;
  std::size_t in = 3;
  for (std::size_t l = 0; l < 3; ++l) {
    p.mlp[l] = make_dense(in, c.latent_dim);
    p.bn[l] = {Eigen::VectorXd::Ones(d), Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d),
               Eigen::VectorXd::Ones(d)};
    in = c.latent_dim;
  }
  p.gnn_self = RowMatrix::Zero(d, d);
  p.gnn_neighbor = RowMatrix::Zero(d, d);
  p.gnn_bias = Eigen::VectorXd::Zero(d);
  p.phi = make_stack(c.latent_dim + 3, c.phi_hidden, 3);
  p.gamma = make_stack(3, c.gamma_hidden, 3);
  p.attn_query = RowMatrix::Zero(static_cast<Eigen::Index>(c.d_attn), 3);
  p.attn_key = RowMatrix::Zero(static_cast<Eigen::Index>(c.d_attn), 3);
  return p;
}

}  // namespace

std::vector<TensorRef> NetworkParameters::tensors() { return collect<TensorRef>(*this); }

std::vector<ConstTensorRef> NetworkParameters::tensors() const {
  return collect<ConstTensorRef>(*this);
}

std::size_t NetworkParameters::learnable_size() const {
  std::size_t n = 0;
  for (const auto& t : tensors())
    if (t.learnable) n += t.values.size();
  return n;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

NetworkParameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
  NetworkParameters p = allocate(config);
  std::mt19937_64 rng(seed);
  for (TensorRef& t : p.tensors()) {
    // Only rank-2 tensors are weights; vectors keep their allocate() defaults.
    if (t.shape.size() != 2) continue;
    const double bound = glorot_bound(t.shape[1], t.shape[0]);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : t.values) v = dist(rng);
  }
  return p;
}

NetworkParameters zeros_like(const NetworkParameters& params) {
  NetworkParameters z = params;
  for (TensorRef& t : z.tensors()) std::fill(t.values.begin(), t.values.end(), 0.0);
  z.generation = 0;
  return z;
}

void validate_parameters(const NetworkParameters& p) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::IncompatibleCheckpoint, what); };
  const auto d = static_cast<Eigen::Index>(p.config.latent_dim);
  Eigen::Index in = 3;
  for (std::size_t l = 0; l < 3; ++l) {
    if (p.mlp[l].weight.rows() != d || p.mlp[l].weight.cols() != in || p.mlp[l].bias.size() != d)
      fail("projector layer " + std::to_string(l) + " has inconsistent shape");
    const BatchNorm& bn = p.bn[l];
    if (bn.scale.size() != d || bn.shift.size() != d || bn.running_mean.size() != d ||
        bn.running_var.size() != d)
      fail("batch norm " + std::to_string(l) + " has inconsistent shape");
    if ((bn.running_var.array() <= 0.0).any()) fail("batch norm running variance must be positive");
    in = d;
  }
  if (p.gnn_self.rows() != d || p.gnn_self.cols() != d || p.gnn_neighbor.rows() != d ||
      p.gnn_neighbor.cols() != d || p.gnn_bias.size() != d)
    fail("GNN layer has inconsistent shape");
  auto check_stack = [&](const std::vector<Dense>& layers, std::size_t first_in, const char* name) {
    if (layers.empty()) fail(std::string(name) + " has no layers");
    std::size_t width = first_in;
    for (const Dense& layer : layers) {
      if (layer.in() != width || static_cast<std::size_t>(layer.bias.size()) != layer.out())
        fail(std::string(name) + " layers are inconsistent");
      width = layer.out();
    }
    if (width != 3) fail(std::string(name) + " must end in 3 outputs");
  };
  check_stack(p.phi, p.config.latent_dim + 3, "phi");
  check_stack(p.gamma, 3, "gamma");
  const auto da = static_cast<Eigen::Index>(p.config.d_attn);
  if (p.attn_query.rows() != da || p.attn_query.cols() != 3 || p.attn_key.rows() != da ||
      p.attn_key.cols() != 3)
    fail("attention projections have inconsistent shape");
  for (const auto& t : p.tensors()) {
    for (double v : t.values)
      if (!std::isfinite(v)) fail("tensor " + t.name + " holds a non-finite value");
  }
}

}  // namespace pcs
