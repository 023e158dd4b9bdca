#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <span>
#include <string_view>

#include "aerograph/numerics/tensor.hpp"

namespace aerograph {

class Tape;

/// Handle to a tensor recorded on a Tape. Cheap to copy; valid as long as
/// the owning tape is alive.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  bool requires_grad() const;
  std::size_t id() const noexcept { return id_; }
  Tape& tape() const;
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of primitive operations.
///
/// Nodes are appended in evaluation order, so the tape is already a
/// topological order; backward() walks it once from the end. A node only
/// keeps a backward closure when at least one parent requires a gradient,
/// which means constant sub-graphs (inference, fixed inputs) cost nothing
/// beyond their forward values.
///
/// A tape is single-threaded. Independent tapes share no state.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Appends the result of a primitive. Throws NumericError if `value`
  /// holds NaN/Inf. `backward` is dropped unless a parent is tracked.
  Var record(std::string_view op, Tensor value, std::span<const Var> parents, BackwardFn backward);
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents, BackwardFn backward) {
    return record(op, std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
  }

  /// Propagates d(loss)/d(node) to every tracked node. The seed adjoint is 1.
  void backward(Var loss);

  /// Gradient of a tracked node after backward(); zeros if the node did not
  /// influence the loss.
  Tensor grad(Var v) const;

  /// Used by backward closures: adds `g` into the adjoint of `v`.
  void accumulate(Var v, const Tensor& g);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  friend class Var;

  struct Node {
    Tensor value;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owner(Var v) const;

  std::deque<Node> nodes_;
  std::deque<Tensor> grads_;
};

}  // namespace aerograph
