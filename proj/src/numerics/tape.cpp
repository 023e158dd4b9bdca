#include "aerograph/numerics/tape.hpp"

#include <string>

#include "aerograph/errors.hpp"

namespace aerograph {

const Tensor& Var::value() const { return tape().nodes_[id_].value; }

bool Var::requires_grad() const { return tape().nodes_[id_].requires_grad; }

Tape& Var::tape() const {
  if (tape_ == nullptr) throw ContractError("use of an unbound Var");
  return *tape_;
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("non-finite value in tape leaf");
  nodes_.push_back(Node{std::move(value), requires_grad, {}});
  grads_.emplace_back();
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::span<const Var> parents, BackwardFn backward) {
  bool tracked = false;
  for (const Var& p : parents) {
    check_owner(p);
    tracked = tracked || nodes_[p.id_].requires_grad;
  }
  if (!value.all_finite()) {
    throw NumericError("operation '" + std::string(op) + "' produced a non-finite value");
  }
  nodes_.push_back(Node{std::move(value), tracked, tracked ? std::move(backward) : BackwardFn{}});
  grads_.emplace_back();
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(Var loss) {
  check_owner(loss);
  const Tensor& out = nodes_[loss.id_].value;
  if (out.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(out.shape()));
  }
  for (auto& g : grads_) g = Tensor();
  if (!nodes_[loss.id_].requires_grad) return;

  grads_[loss.id_] = Tensor(out.shape(), 1.0);
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || grads_[i].empty()) continue;
    node.backward(*this, grads_[i]);
  }
}

Tensor Tape::grad(Var v) const {
  check_owner(v);
  if (!nodes_[v.id_].requires_grad) {
    throw ContractError("gradient requested for an untracked tensor");
  }
  const Tensor& g = grads_[v.id_];
  if (g.empty()) return Tensor::zeros_like(nodes_[v.id_].value);
  return g;
}

void Tape::accumulate(Var v, const Tensor& g) {
  if (!nodes_[v.id_].requires_grad) return;
  Tensor& slot = grads_[v.id_];
  if (slot.empty()) {
    slot = g;
    return;
  }
  auto dst = slot.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::check_owner(Var v) const {
  if (v.tape_ != this) throw ContractError("Var belongs to a different tape");
}

}  // namespace aerograph
