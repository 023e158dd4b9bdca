#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aerograph/model/sequence.hpp"
#include "aerograph/numerics/adam.hpp"
#include "aerograph/numerics/tape.hpp"

namespace aerograph {

/// Anything that maps a batch of input windows to one next-day value per
/// node (transformed domain). Implemented by the trained network and by the
/// analytic surrogates the analysis tests use.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::size_t window_days() const = 0;
  /// (B * nodes) x 1 predictions.
  virtual Tensor predict(const SequenceBatch& batch) const = 0;
};

struct ModelConfig {
  std::size_t nodes = 10;
  std::size_t window_days = kWindowDays;
  std::size_t input_dim = 1;
  std::size_t embedding_dim = 10;
  std::size_t hidden_dim = 16;
  double norm_eps = 1e-5;

  /// Width of the output head input: both final hidden states plus the
  /// node's raw features for every input day.
  std::size_t head_inputs() const { return 2 * hidden_dim + window_days * input_dim; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Weights are stored input-major (in x out) so a layer computes H * W.

struct SageLayer {
  Tensor w_self;   // in x out, applied to the node's own embedding
  Tensor w_neigh;  // in x out, applied to the aggregated neighbour embedding
};

struct GraphNormLayer {
  Tensor gamma;  // 1 x d
  Tensor beta;
  Tensor alpha;
};

/// Gate weights act on concat[h_prev, x]; rows [0, hidden) multiply h_prev.
struct LstmCell {
  Tensor w_f, w_i, w_o, w_c;  // (hidden + in) x hidden
  Tensor b_f, b_i, b_o, b_c;  // 1 x hidden
};

struct OutputHead {
  Tensor weight;  // head_inputs x 1
  Tensor bias;    // 1 x 1
};

struct BoundSage {
  Var w_self, w_neigh;
};
struct BoundNorm {
  Var gamma, beta, alpha;
};
struct BoundLstm {
  Var w_f, w_i, w_o, w_c, b_f, b_i, b_o, b_c;
};
struct BoundHead {
  Var weight, bias;
};

/// Model parameters placed on a tape, in parameters() order.
struct BoundModel {
  BoundSage sage1, sage2;
  BoundNorm norm1, norm2;
  BoundLstm lstm1, lstm2;
  BoundHead head;
  std::vector<Var> all;
};

inline constexpr std::size_t kParameterTensors = 28;

/// Assigns tape variables, given in DcsageModel::parameters() order, to
/// their layer slots.
BoundModel bind_parameters(std::vector<Var> all);

/// h_v = ReLU(W_self^T h_v + W_neigh^T mean_{u in N(v)} A[u,v] h_u).
Var sage_forward(const BoundSage& layer, Var h, const Tensor& adjacency, std::size_t nodes);

struct LstmState {
  Var h;
  Var c;
};

/// f, i, o = sigmoid(W [h, x] + b); C~ = tanh(W_C [h, x] + b_C);
/// C = f * C_prev + i * C~; h = o * tanh(C).
LstmState lstm_step(const BoundLstm& cell, LstmState prev, Var x);

/// Two weighted GraphSAGE layers (each followed by GraphNorm), two stacked
/// per-node LSTM cells fed with both SAGE outputs, and a linear head over
/// ReLU(concat(h1, h2, the node's input features)).
class DcsageModel : public Forecaster {
 public:
  DcsageModel() : DcsageModel(ModelConfig{}) {}
  /// All-zero parameters of the right shapes (GraphNorm gamma/alpha = 1).
  explicit DcsageModel(ModelConfig config);

  /// Kaiming-uniform SAGE and head weights, uniform(1/sqrt(hidden)) LSTM.
  static DcsageModel initialize(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t window_days() const override { return config_.window_days; }

  SageLayer sage1, sage2;
  GraphNormLayer norm1, norm2;
  LstmCell lstm1, lstm2;
  OutputHead head;

  /// Stable, named view of every parameter tensor.
  std::vector<NamedTensor> parameters();
  std::vector<std::pair<std::string, const Tensor*>> parameters() const;
  std::size_t parameter_count() const;

  BoundModel bind(Tape& tape, bool track) const;

  /// Differentiable forward pass on the tape that owns `params`.
  /// Returns (B * nodes) x 1 predictions.
  Var forward(const BoundModel& params, const SequenceBatch& batch) const;

  Tensor predict(const SequenceBatch& batch) const override;

  friend bool operator==(const DcsageModel& a, const DcsageModel& b);

 private:
  void check_batch(const SequenceBatch& batch) const;

  ModelConfig config_;
};

}  // namespace aerograph
