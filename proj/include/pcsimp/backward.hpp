#pragma once

#include <cstdint>
#include <span>

#include "pcsimp/model.hpp"
#include "pcsimp/network.hpp"

namespace pcs {

/// Everything recorded by a forward pass of the learned simplifier. The center
/// selection and all neighbor lists are constants of the trace.
struct PipelineTrace {
  std::uint64_t generation = 0;
  Positions input;
  ProjectorCache projector;
  LatentCloud latent;
  CenterGraph centers;
  RefineCache refine;
  Positions output;
};

/// Projector -> latent FPS -> center graph -> refinement.
PipelineTrace pipeline_forward(std::span<const Vec3> positions, const NeighborGraph& connectivity,
                               const NetworkParameters& params, std::size_t m, std::size_t start,
                               Mode mode);

/// Same pipeline with a given center selection (no FPS).
PipelineTrace pipeline_forward_frozen(std::span<const Vec3> positions, const NeighborGraph& connectivity,
                                      const NetworkParameters& params, const CenterGraph& centers,
                                      Mode mode);

/// Gradients of every learnable tensor given d loss / d output positions.
/// Non-learnable tensors (running statistics) come back zero. Throws StaleTrace
/// if `params` changed since the forward pass.
NetworkParameters pipeline_backward(const PipelineTrace& trace, const NetworkParameters& params,
                                    std::span<const Vec3> output_grad);

}  // namespace pcs
