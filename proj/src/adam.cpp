#include "pcsimp/adam.hpp"

#include <cmath>

#include "pcsimp/error.hpp"

namespace pcs {

AdamState make_adam_state(const NetworkParameters& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::uint64_t step, double lr, const AdamConfig& config) {
  if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size())
    throw Error(ErrorCode::ShapeMismatch, "Adam buffers differ in size");
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g;
    v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g * g;
    params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config.eps);
  }
}

void adam_step(NetworkParameters& params, const NetworkParameters& grads, AdamState& state, double lr,
               const AdamConfig& config) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw Error(ErrorCode::ShapeMismatch, "gradient layout differs from parameters");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (g[i].shape != p[i].shape || m[i].shape != p[i].shape || v[i].shape != p[i].shape)
      throw Error(ErrorCode::ShapeMismatch, "tensor " + p[i].name + " has mismatched gradient shape");
  }
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p[i].learnable) continue;
    adam_update(p[i].values, g[i].values, m[i].values, v[i].values, state.step, lr, config);
  }
  ++params.generation;
}

}  // namespace pcs
