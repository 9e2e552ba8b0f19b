#pragma once

#include <cstdint>
#include <span>

#include "pcsimp/network.hpp"

namespace pcs {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  NetworkParameters first_moment;
  NetworkParameters second_moment;
  std::uint64_t step = 0;
};

AdamState make_adam_state(const NetworkParameters& params);

/// One bias-corrected Adam update of a flat parameter block. `step` is the
/// 1-based step number after increment.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::uint64_t step, double lr, const AdamConfig& config);

/// Updates every learnable tensor of `params` and bumps its generation.
/// Throws ShapeMismatch if `grads` or `state` disagree with `params`.
void adam_step(NetworkParameters& params, const NetworkParameters& grads, AdamState& state, double lr,
               const AdamConfig& config = {});

}  // namespace pcs
