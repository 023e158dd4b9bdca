#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerograph/dataio/dataset.hpp"
#include "aerograph/model/checkpoint.hpp"
#include "aerograph/numerics/tape.hpp"

namespace aerograph {

struct TrainConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-2;
  std::size_t lr_decay_patience = 40;
  double lr_decay_factor = 0.5;
  std::uint64_t seed = 1;
  std::size_t ensemble_size = 100;
  std::size_t hidden_dim = 16;
  /// Threads used by train_ensemble (0 = one per hardware thread).
  std::size_t workers = 0;

  ModelConfig model_config() const;
  /// Throws ContractError on out-of-range settings.
  void validate() const;
};

/// sum|prediction - target| / sum(target) over every window and node.
/// Throws ContractError when the targets sum to zero.
Var mase_loss(Var prediction, const Tensor& target);
double mase_loss(const Tensor& prediction, const Tensor& target);

/// Layers reported in the gradient-flow table, input side first.
const std::vector<std::string>& gradient_groups();

struct TrainReport {
  std::uint64_t seed = 0;
  std::vector<double> train_loss;       // per epoch, before that epoch's update
  std::vector<double> validation_loss;  // per epoch, after the update
  std::vector<double> learning_rate;    // per epoch, the rate used for the update
  /// [epoch][group]: mean absolute gradient over the group's parameters.
  std::vector<std::vector<double>> gradient_flow;
  std::size_t selected_epoch = 0;  // 1-based
  double selected_validation_loss = 0.0;
  std::size_t lr_decays = 0;
};

struct TrainResult {
  ModelCheckpoint checkpoint;
  TrainReport report;
};

/// Full-batch Adam on the training windows. After every epoch the
/// validation loss is measured; when it has not improved for
/// `lr_decay_patience` epochs the learning rate is multiplied by
/// `lr_decay_factor` and the count restarts. Returns the parameters from the
/// first epoch with the lowest validation loss.
///
/// Throws ContractError for an empty split, TrainingError (with the epoch)
/// on a non-finite loss.
TrainResult train_one(std::span<const DailyGraph> graphs, const DatasetSplit& split, const TrainConfig& config,
                      std::uint64_t seed);

/// Members use seeds config.seed + k. When `out_dir` is given, member k is
/// written as model_<k>.ckpt and report_<k>.json. A failing member surfaces
/// as TrainingError naming its seed.
std::vector<TrainResult> train_ensemble(std::span<const DailyGraph> graphs, const DatasetSplit& split,
                                        const TrainConfig& config,
                                        const std::optional<std::filesystem::path>& out_dir = std::nullopt);

std::string checkpoint_filename(std::size_t index);
/// Loads model_000.ckpt, model_001.ckpt, ... in index order.
std::vector<ModelCheckpoint> load_ensemble(const std::filesystem::path& dir);

std::string report_json(const TrainReport& report);

/// Ensemble-mean one-step predictions, (B * nodes) x 1.
Tensor ensemble_predict(std::span<const ModelCheckpoint> ensemble, const SequenceBatch& batch);

}  // namespace aerograph
