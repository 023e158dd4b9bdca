#include "aerograph/model/dcsage.hpp"

#include <cmath>
#include <string>

#include "aerograph/errors.hpp"
#include "aerograph/numerics/init.hpp"
#include "aerograph/numerics/ops.hpp"

namespace aerograph {
namespace {

SageLayer zero_sage(std::size_t in, std::size_t out) { return {Tensor({in, out}), Tensor({in, out})}; }

GraphNormLayer unit_norm(std::size_t d) { return {Tensor({1, d}, 1.0), Tensor({1, d}), Tensor({1, d}, 1.0)}; }

LstmCell zero_lstm(std::size_t in, std::size_t hidden) {
  const Shape w{hidden + in, hidden};
  const Shape b{1, hidden};
  return {Tensor(w), Tensor(w), Tensor(w), Tensor(w), Tensor(b), Tensor(b), Tensor(b), Tensor(b)};
}

template <typename Visit>
void visit_parameters(DcsageModel& m, Visit&& visit) {
  visit("sage1.W_self", m.sage1.w_self);
  visit("sage1.W_neigh", m.sage1.w_neigh);
  visit("norm1.gamma", m.norm1.gamma);
  visit("norm1.beta", m.norm1.beta);
  visit("norm1.alpha", m.norm1.alpha);
  visit("sage2.W_self", m.sage2.w_self);
  visit("sage2.W_neigh", m.sage2.w_neigh);
  visit("norm2.gamma", m.norm2.gamma);
  visit("norm2.beta", m.norm2.beta);
  visit("norm2.alpha", m.norm2.alpha);
  for (auto [prefix, cell] : {std::pair{"lstm1.", &m.lstm1}, std::pair{"lstm2.", &m.lstm2}}) {
    const std::string p = prefix;
    visit(p + "W_f", cell->w_f);
    visit(p + "W_i", cell->w_i);
    visit(p + "W_o", cell->w_o);
    visit(p + "W_C", cell->w_c);
    visit(p + "b_f", cell->b_f);
    visit(p + "b_i", cell->b_i);
    visit(p + "b_o", cell->b_o);
    visit(p + "b_C", cell->b_c);
  }
  visit("head.W", m.head.weight);
  visit("head.b", m.head.bias);
}

}  // namespace

Var sage_forward(const BoundSage& layer, Var h, const Tensor& adjacency, std::size_t nodes) {
  Var neighbours = neighbor_mean(h, adjacency, nodes);
  return relu(add(matmul(h, layer.w_self), matmul(neighbours, layer.w_neigh)));
}

LstmState lstm_step(const BoundLstm& cell, LstmState prev, Var x) {
  Var z = concat_cols({prev.h, x});
  Var f = sigmoid(add_row(matmul(z, cell.w_f), cell.b_f));
  Var i = sigmoid(add_row(matmul(z, cell.w_i), cell.b_i));
  Var o = sigmoid(add_row(matmul(z, cell.w_o), cell.b_o));
  Var candidate = tanh(add_row(matmul(z, cell.w_c), cell.b_c));
  Var c = add(mul(f, prev.c), mul(i, candidate));
  Var h = mul(o, tanh(c));
  return {h, c};
}

DcsageModel::DcsageModel(ModelConfig config) : config_(config) {
  if (config_.nodes == 0 || config_.window_days == 0 || config_.input_dim == 0 || config_.embedding_dim == 0 ||
      config_.hidden_dim == 0) {
    throw ContractError("ModelConfig dimensions must be positive");
  }
  if (!(config_.norm_eps > 0.0)) throw ContractError("ModelConfig norm_eps must be positive");
  const std::size_t e = config_.embedding_dim;
  const std::size_t h = config_.hidden_dim;
  sage1 = zero_sage(config_.input_dim, e);
  norm1 = unit_norm(e);
  sage2 = zero_sage(e, e);
  norm2 = unit_norm(e);
  lstm1 = zero_lstm(2 * e, h);
  lstm2 = zero_lstm(h, h);
  head = {Tensor({config_.head_inputs(), 1}), Tensor({1, 1})};
}

DcsageModel DcsageModel::initialize(const ModelConfig& config, std::uint64_t seed) {
  DcsageModel m(config);
  Rng rng(seed);
  const std::size_t e = config.embedding_dim;
  m.sage1.w_self = kaiming_uniform_init({config.input_dim, e}, config.input_dim, rng);
  m.sage1.w_neigh = kaiming_uniform_init({config.input_dim, e}, config.input_dim, rng);
  m.sage2.w_self = kaiming_uniform_init({e, e}, e, rng);
  m.sage2.w_neigh = kaiming_uniform_init({e, e}, e, rng);
  const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(config.hidden_dim));
  for (LstmCell* cell : {&m.lstm1, &m.lstm2}) {
    for (Tensor* t : {&cell->w_f, &cell->w_i, &cell->w_o, &cell->w_c, &cell->b_f, &cell->b_i, &cell->b_o, &cell->b_c}) {
      *t = uniform_init(t->shape(), lstm_bound, rng);
    }
  }
  const std::size_t fan_in = config.head_inputs();
  m.head.weight = kaiming_uniform_init({fan_in, 1}, fan_in, rng);
  m.head.bias = uniform_init({1, 1}, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
  return m;
}

std::vector<NamedTensor> DcsageModel::parameters() {
  std::vector<NamedTensor> out;
  visit_parameters(*this, [&](const std::string& name, Tensor& t) { out.push_back({name, &t}); });
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> DcsageModel::parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  visit_parameters(const_cast<DcsageModel&>(*this),
                   [&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

std::size_t DcsageModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t->size();
  return n;
}

BoundModel bind_parameters(std::vector<Var> all) {
  BoundModel b;
  b.all = std::move(all);
  if (b.all.size() != kParameterTensors) {
    throw ContractError("bind_parameters: expected " + std::to_string(kParameterTensors) + " tensors, got " +
                        std::to_string(b.all.size()));
  }
  std::size_t k = 0;
  auto next = [&]() { return b.all[k++]; };
  b.sage1 = {next(), next()};
  b.norm1 = {next(), next(), next()};
  b.sage2 = {next(), next()};
  b.norm2 = {next(), next(), next()};
  for (BoundLstm* cell : {&b.lstm1, &b.lstm2}) {
    cell->w_f = next();
    cell->w_i = next();
    cell->w_o = next();
    cell->w_c = next();
    cell->b_f = next();
    cell->b_i = next();
    cell->b_o = next();
    cell->b_c = next();
  }
  b.head = {next(), next()};
  return b;
}

BoundModel DcsageModel::bind(Tape& tape, bool track) const {
  std::vector<Var> all;
  for (const auto& [name, t] : parameters()) all.push_back(tape.leaf(*t, track));
  return bind_parameters(std::move(all));
}

void DcsageModel::check_batch(const SequenceBatch& batch) const {
  if (batch.days() != config_.window_days) {
    throw ContractError("forward: window has " + std::to_string(batch.days()) + " days, model expects " +
                        std::to_string(config_.window_days));
  }
  if (batch.nodes != config_.nodes || batch.adjacency.size() != batch.days()) {
    throw ContractError("forward: batch of " + std::to_string(batch.nodes) + "-node graphs, model expects " +
                        std::to_string(config_.nodes));
  }
  for (const Tensor& x : batch.features) {
    if (x.rank() != 2 || x.rows() != batch.rows() || x.cols() != config_.input_dim) {
      throw DimensionError("forward: feature block " + shape_string(x.shape()) + " does not match the batch");
    }
  }
}

Var DcsageModel::forward(const BoundModel& p, const SequenceBatch& batch) const {
  check_batch(batch);
  Tape& tape = p.head.weight.tape();
  const std::size_t rows = batch.rows();
  const std::size_t n = config_.nodes;
  const double eps = config_.norm_eps;

  LstmState s1{tape.constant(Tensor({rows, config_.hidden_dim})), tape.constant(Tensor({rows, config_.hidden_dim}))};
  LstmState s2 = s1;
  std::vector<Var> head_parts{Var{}, Var{}};
  for (std::size_t day = 0; day < batch.days(); ++day) {
    Var x = tape.constant(batch.features[day]);
    head_parts.push_back(x);
    const Tensor& adj = batch.adjacency[day];
    Var one_hop = graph_norm(sage_forward(p.sage1, x, adj, n), p.norm1.gamma, p.norm1.beta, p.norm1.alpha, n, eps);
    Var two_hop =
        graph_norm(sage_forward(p.sage2, one_hop, adj, n), p.norm2.gamma, p.norm2.beta, p.norm2.alpha, n, eps);
    s1 = lstm_step(p.lstm1, s1, concat_cols({one_hop, two_hop}));
    s2 = lstm_step(p.lstm2, s2, s1.h);
  }
  head_parts[0] = s1.h;
  head_parts[1] = s2.h;
  Var z = relu(concat_cols(head_parts));
  return add_row(matmul(z, p.head.weight), p.head.bias);
}

Tensor DcsageModel::predict(const SequenceBatch& batch) const {
  Tape tape;
  const BoundModel p = bind(tape, false);
  return forward(p, batch).value();
}

bool operator==(const DcsageModel& a, const DcsageModel& b) {
  if (!(a.config_ == b.config_)) return false;
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!(*pa[i].second == *pb[i].second)) return false;
  }
  return true;
}

}  // namespace aerograph
