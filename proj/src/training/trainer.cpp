#include "aerograph/training/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "aerograph/errors.hpp"
#include "aerograph/numerics/adam.hpp"
#include "aerograph/numerics/ops.hpp"
#include "aerograph/numerics/parallel.hpp"
#include "json.hpp"

namespace aerograph {
namespace {

double target_total(const Tensor& target) {
  double total = 0.0;
  for (double v : target.values()) total += v;
  if (!(total > 0.0)) throw ContractError("mase_loss: targets sum to " + std::to_string(total) + ", need > 0");
  return total;
}

// Parameter name -> gradient group. "lstm1.W_f" rows [0, hidden) act on the
// recurrent state and the rest on the layer input, so LSTM weights are split.
std::string group_of(const std::string& name) {
  const std::string layer = name.substr(0, name.find('.'));
  if (layer == "lstm1" || layer == "lstm2") {
    return layer + (name.find(".b_") != std::string::npos ? ".bias" : ".weights");
  }
  return layer;
}

}  // namespace

ModelConfig TrainConfig::model_config() const {
  ModelConfig c;
  c.hidden_dim = hidden_dim;
  return c;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ContractError("TrainConfig: epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ContractError("TrainConfig: learning rate must be positive");
  if (!(lr_decay_factor > 0.0 && lr_decay_factor < 1.0)) {
    throw ContractError("TrainConfig: lr decay factor must lie in (0, 1)");
  }
  if (ensemble_size == 0) throw ContractError("TrainConfig: ensemble size must be at least 1");
  if (hidden_dim == 0) throw ContractError("TrainConfig: hidden_dim must be positive");
}

Var mase_loss(Var prediction, const Tensor& target) {
  if (prediction.value().shape() != target.shape()) {
    throw DimensionError("mase_loss: prediction " + shape_string(prediction.value().shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  const double total = target_total(target);
  Tape& tape = prediction.tape();
  return scale(sum(abs(sub(prediction, tape.constant(target)))), 1.0 / total);
}

double mase_loss(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) {
    throw DimensionError("mase_loss: prediction " + shape_string(prediction.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  const double total = target_total(target);
  double err = 0.0;
  for (std::size_t i = 0; i < target.size(); ++i) err += std::abs(prediction[i] - target[i]);
  return err / total;
}

const std::vector<std::string>& gradient_groups() {
  static const std::vector<std::string> groups{"sage1",         "norm1",      "sage2",         "norm2",     "lstm1.weights",
                                               "lstm1.bias",    "lstm2.weights", "lstm2.bias", "head"};
  return groups;
}

TrainResult train_one(std::span<const DailyGraph> graphs, const DatasetSplit& split, const TrainConfig& config,
                      std::uint64_t seed) {
  config.validate();
  if (split.train.empty() || split.validation.empty()) {
    throw ContractError("train_one: training and validation sets must be non-empty");
  }
  const ModelConfig model_config = config.model_config();
  const SequenceBatch train_x = make_batch(graphs, split.train, model_config.window_days);
  const Tensor train_y = make_targets(graphs, split.train, model_config.window_days);
  const SequenceBatch val_x = make_batch(graphs, split.validation, model_config.window_days);
  const Tensor val_y = make_targets(graphs, split.validation, model_config.window_days);

  DcsageModel model = DcsageModel::initialize(model_config, seed);
  std::vector<NamedTensor> params = model.parameters();
  const auto& groups = gradient_groups();
  std::map<std::string, std::size_t> group_index;
  for (std::size_t g = 0; g < groups.size(); ++g) group_index[groups[g]] = g;

  AdamState adam;
  adam.learning_rate = config.learning_rate;
  TrainReport report;
  report.seed = seed;
  DcsageModel best = model;
  double best_loss = INFINITY;
  std::size_t since_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<Tensor> grads;
    double loss_value = 0.0;
    try {
      Tape tape;
      const BoundModel bound = model.bind(tape, true);
      Var loss = mase_loss(model.forward(bound, train_x), train_y);
      loss_value = loss.value().item();
      tape.backward(loss);
      for (const Var& v : bound.all) grads.push_back(tape.grad(v));
    } catch (const NumericError& e) {
      throw TrainingError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(loss_value)) throw TrainingError("epoch " + std::to_string(epoch) + ": loss is not finite");

    std::vector<double> flow_sum(groups.size(), 0.0);
    std::vector<double> flow_count(groups.size(), 0.0);
    for (std::size_t p = 0; p < params.size(); ++p) {
      const std::size_t g = group_index.at(group_of(params[p].name));
      for (double v : grads[p].values()) flow_sum[g] += std::abs(v);
      flow_count[g] += static_cast<double>(grads[p].size());
    }
    for (std::size_t g = 0; g < groups.size(); ++g) flow_sum[g] /= flow_count[g];

    report.train_loss.push_back(loss_value);
    report.learning_rate.push_back(adam.learning_rate);
    report.gradient_flow.push_back(std::move(flow_sum));
    adam_step(params, grads, adam);

    double val_loss = 0.0;
    try {
      val_loss = mase_loss(model.predict(val_x), val_y);
    } catch (const NumericError& e) {
      throw TrainingError("epoch " + std::to_string(epoch) + " (validation): " + e.what());
    }
    if (!std::isfinite(val_loss)) {
      throw TrainingError("epoch " + std::to_string(epoch) + ": validation loss is not finite");
    }
    report.validation_loss.push_back(val_loss);
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = model;
      report.selected_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= config.lr_decay_patience) {
      adam.learning_rate *= config.lr_decay_factor;
      ++report.lr_decays;
      since_improvement = 0;
    }
  }
  report.selected_validation_loss = best_loss;

  TrainResult result{ModelCheckpoint{std::move(best), {}}, std::move(report)};
  CheckpointMetadata& meta = result.checkpoint.metadata;
  meta.seed = seed;
  meta.config_hash = model_config_hash(model_config);
  meta.selected_epoch = result.report.selected_epoch;
  meta.validation_loss = best_loss;
  return result;
}

std::string checkpoint_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "model_%03zu.ckpt", index);
  return buf;
}

namespace {

std::string report_filename(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "report_%03zu.json", index);
  return buf;
}

}  // namespace

std::vector<TrainResult> train_ensemble(std::span<const DailyGraph> graphs, const DatasetSplit& split,
                                        const TrainConfig& config, const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  std::vector<std::optional<TrainResult>> slots(config.ensemble_size);
  parallel_for(
      config.ensemble_size,
      [&](std::size_t k) {
        const std::uint64_t seed = config.seed + k;
        try {
          TrainResult r = train_one(graphs, split, config, seed);
          r.checkpoint.metadata.ensemble_index = k;
          if (out_dir) {
            save_checkpoint(*out_dir / checkpoint_filename(k), r.checkpoint);
            write_file_atomic(*out_dir / report_filename(k), report_json(r.report));
          }
          slots[k] = std::move(r);
        } catch (const std::exception& e) {
          throw TrainingError("ensemble member " + std::to_string(k) + " (seed " + std::to_string(seed) +
                              ") failed: " + e.what());
        }
      },
      config.workers);
  std::vector<TrainResult> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::vector<ModelCheckpoint> load_ensemble(const std::filesystem::path& dir) {
  std::vector<ModelCheckpoint> out;
  for (std::size_t k = 0;; ++k) {
    const auto path = dir / checkpoint_filename(k);
    if (!std::filesystem::exists(path)) break;
    out.push_back(load_checkpoint(path));
  }
  if (out.empty()) throw DataError("no checkpoints found in " + dir.string());
  return out;
}

std::string report_json(const TrainReport& report) {
  nlohmann::json flow = nlohmann::json::array();
  for (std::size_t e = 0; e < report.gradient_flow.size(); ++e) {
    nlohmann::json row{{"epoch", e + 1}};
    for (std::size_t g = 0; g < gradient_groups().size(); ++g) row[gradient_groups()[g]] = report.gradient_flow[e][g];
    flow.push_back(std::move(row));
  }
  const nlohmann::json j{{"seed", report.seed},
                         {"train_loss", report.train_loss},
                         {"validation_loss", report.validation_loss},
                         {"learning_rate", report.learning_rate},
                         {"gradient_groups", gradient_groups()},
                         {"gradient_flow", flow},
                         {"selected_epoch", report.selected_epoch},
                         {"selected_validation_loss", report.selected_validation_loss},
                         {"lr_decays", report.lr_decays}};
  return j.dump(2);
}

Tensor ensemble_predict(std::span<const ModelCheckpoint> ensemble, const SequenceBatch& batch) {
  if (ensemble.empty()) throw ContractError("ensemble_predict: empty ensemble");
  std::vector<Tensor> each(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t k) { each[k] = ensemble[k].model.predict(batch); });
  Tensor mean = Tensor::zeros_like(each.front());
  for (const Tensor& t : each) {
    for (std::size_t i = 0; i < t.size(); ++i) mean[i] += t[i];
  }
  for (double& v : mean.values()) v /= static_cast<double>(ensemble.size());
  return mean;
}

}  // namespace aerograph
