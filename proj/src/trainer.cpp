#include "pcsimp/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <utility>

#include "pcsimp/backward.hpp"
#include "pcsimp/descriptors.hpp"
#include "pcsimp/error.hpp"
#include "pcsimp/knn.hpp"
#include "pcsimp/model.hpp"
#include "pcsimp/sampling.hpp"
#include "pcsimp/text.hpp"

namespace pcs {

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::BadParams, "epochs must be at least 1");
  if (!(learning_rate >= 0.0)) throw Error(ErrorCode::BadParams, "learning rate must be nonnegative");
  if (!(lr_decay_per_epoch > 0.0 && lr_decay_per_epoch <= 1.0))
    throw Error(ErrorCode::BadParams, "lr decay must lie in (0, 1]");
  if (ratio_schedule.empty()) throw Error(ErrorCode::BadParams, "ratio schedule is empty");
  for (double r : ratio_schedule)
    if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorCode::BadRatio, "training ratio outside (0, 1]");
}

TrainingSample prepare_sample(const PointCloud& cloud, const ModelConfig& model, const LossConfig& loss) {
  cloud.validate();
  TrainingSample s;
  s.positions = cloud.positions;
  s.connectivity = build_knn(s.positions, model.graph_k);
  const SurfaceDescriptors d = compute_descriptors(s.positions, loss.descriptor_k, loss.bandwidth);
  s.mean_curvature = d.mean_curvature;
  s.weights = curvature_weights(d.mean_curvature, loss);
  return s;
}

StepStats train_step(NetworkParameters& params, AdamState& state, const TrainingSample& sample,
                     std::size_t m, std::size_t start, const LossConfig& loss, double lr,
                     const TrainConfig& config) {
  const PipelineTrace trace =
      pipeline_forward(sample.positions, sample.connectivity, params, m, start, Mode::Train);
  const LossStructure structure = loss_structure(sample.positions, trace.output, loss);
  const LossValue value = evaluate_total_loss(sample.positions, sample.mean_curvature, sample.weights,
                                              trace.output, structure, loss, true);
  StepStats stats{value.total, value.adaptive_cd, value.curvature_error};
  if (!std::isfinite(value.total)) return stats;

  NetworkParameters grads = pipeline_backward(trace, params, value.gradient);
  if (config.decay_mode == TrainConfig::DecayMode::L2) {
    auto g = grads.tensors();
    const auto p = std::as_const(params).tensors();
    for (std::size_t t = 0; t < g.size(); ++t) {
      if (!g[t].learnable) continue;
      for (std::size_t i = 0; i < g[t].values.size(); ++i)
        g[t].values[i] += config.lr_decay_per_epoch * p[t].values[i];
    }
  }
  update_running_stats(params, trace.projector);
  adam_step(params, grads, state, lr, config.adam);
  return stats;
}

TrainResult train(const std::vector<PointCloud>& dataset, const TrainConfig& config, const LossConfig& loss,
                  NetworkParameters initial, const EpochCallback& on_epoch) {
  config.validate();
  loss.validate();
  if (dataset.empty()) throw Error(ErrorCode::BadParams, "training needs at least one cloud");
  validate_parameters(initial);

  TrainResult result;
  result.params = std::move(initial);
  NetworkParameters& params = result.params;
  params.config.descriptor_k = loss.descriptor_k;
  params.config.bandwidth = loss.bandwidth;
  params.config.seed = config.seed;

  std::vector<TrainingSample> samples;
  samples.reserve(dataset.size());
  for (const PointCloud& cloud : dataset) samples.push_back(prepare_sample(cloud, params.config, loss));

  AdamState state = make_adam_state(params);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = config.learning_rate;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t step = 0; step < order.size(); ++step) {
      const TrainingSample& s = samples[order[step]];
      std::uniform_int_distribution<std::size_t> pick_ratio(0, config.ratio_schedule.size() - 1);
      const double ratio = config.ratio_schedule[pick_ratio(rng)];
      std::uniform_int_distribution<std::size_t> pick_start(0, s.positions.size() - 1);
      const std::size_t start = config.random_start ? pick_start(rng) : 0;
      const std::size_t m = target_count(s.positions.size(), ratio);

      const StepStats stats = train_step(params, state, s, m, start, loss, lr, config);
      if (!std::isfinite(stats.loss))
        throw Error(ErrorCode::NaNLoss, "non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                                            std::to_string(step) + " (cloud " + std::to_string(order[step]) +
                                            ", ratio " + format_double(ratio) + ", adaptive CD " +
                                            format_double(stats.adaptive_cd) + ", CE " +
                                            format_double(stats.curvature_error) + ")");
      sum += stats.loss;
    }
    const EpochRecord record{epoch, sum / static_cast<double>(order.size()), lr};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record, params);
    if (config.decay_mode == TrainConfig::DecayMode::LearningRate) lr *= config.lr_decay_per_epoch;
  }
  return result;
}

TrainResult train(const std::vector<PointCloud>& dataset, const TrainConfig& config, const LossConfig& loss,
                  const ModelConfig& model, const EpochCallback& on_epoch) {
  return train(dataset, config, loss, init_parameters(model, config.seed), on_epoch);
}

std::string loss_log_row(const EpochRecord& r) {
  return std::to_string(r.epoch) + "," + format_double(r.mean_loss) + "," + format_double(r.lr) + "\n";
}

std::string loss_log_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,mean_loss,lr\n";
  for (const EpochRecord& r : history) out += loss_log_row(r);
  return out;
}

}  // namespace pcs
