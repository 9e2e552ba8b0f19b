#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pcsimp/adam.hpp"
#include "pcsimp/geometry.hpp"
#include "pcsimp/losses.hpp"
#include "pcsimp/network.hpp"

namespace pcs {

struct TrainConfig {
  /// How the per-epoch 0.99 factor is applied: multiplicative learning-rate
  /// decay, or an L2 penalty with that coefficient at a constant learning rate.
  enum class DecayMode { LearningRate, L2 };

  std::size_t epochs = 150;
  double learning_rate = 1e-3;
  double lr_decay_per_epoch = 0.99;
  DecayMode decay_mode = DecayMode::LearningRate;
  AdamConfig adam;
  std::uint64_t seed = 0;
  std::vector<double> ratio_schedule{0.05, 0.1, 0.2, 0.3, 0.5, 0.8};
  /// Draw the FPS start point per step instead of always using index 0.
  bool random_start = true;

  void validate() const;
};

/// Reference-side quantities of one training cloud, computed once.
struct TrainingSample {
  Positions positions;
  NeighborGraph connectivity;
  std::vector<double> mean_curvature;
  std::vector<double> weights;
};

TrainingSample prepare_sample(const PointCloud& cloud, const ModelConfig& model, const LossConfig& loss);

struct StepStats {
  double loss = 0.0;
  double adaptive_cd = 0.0;
  double curvature_error = 0.0;
};

/// One forward/backward/Adam step on a single cloud.
StepStats train_step(NetworkParameters& params, AdamState& state, const TrainingSample& sample,
                     std::size_t m, std::size_t start, const LossConfig& loss, double lr,
                     const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  NetworkParameters params;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&, const NetworkParameters&)>;

/// Shuffled single-cloud steps for config.epochs epochs. Throws NaNLoss with the
/// offending epoch/step when the objective stops being finite.
TrainResult train(const std::vector<PointCloud>& dataset, const TrainConfig& config,
                  const LossConfig& loss, NetworkParameters initial, const EpochCallback& on_epoch = {});

TrainResult train(const std::vector<PointCloud>& dataset, const TrainConfig& config,
                  const LossConfig& loss, const ModelConfig& model, const EpochCallback& on_epoch = {});

/// "epoch,mean_loss,lr" CSV with a header line.
std::string loss_log_csv(const std::vector<EpochRecord>& history);
std::string loss_log_row(const EpochRecord& record);  // newline-terminated

}  // namespace pcs
