#pragma once

#include <cstddef>
#include <span>

#include "aerograph/numerics/tape.hpp"

namespace aerograph {

// Differentiable primitives. Binary elementwise ops require equal shapes;
// the only broadcast is tensor-scalar (scale, add_scalar) and the explicit
// row-vector bias add.

Var matmul(Var a, Var b);

enum class UnaryOp { kSigmoid, kTanh, kRelu, kAbs, kLog10p1, kPow10m1 };
enum class BinaryOp { kAdd, kSub, kMul };

Var elementwise(UnaryOp op, Var a);
Var elementwise(BinaryOp op, Var a, Var b);

inline Var add(Var a, Var b) { return elementwise(BinaryOp::kAdd, a, b); }
inline Var sub(Var a, Var b) { return elementwise(BinaryOp::kSub, a, b); }
inline Var mul(Var a, Var b) { return elementwise(BinaryOp::kMul, a, b); }
inline Var sigmoid(Var a) { return elementwise(UnaryOp::kSigmoid, a); }
inline Var tanh(Var a) { return elementwise(UnaryOp::kTanh, a); }
inline Var relu(Var a) { return elementwise(UnaryOp::kRelu, a); }
inline Var abs(Var a) { return elementwise(UnaryOp::kAbs, a); }
/// log10(x + 1); defined for x > -1.
inline Var log10p1(Var a) { return elementwise(UnaryOp::kLog10p1, a); }
/// 10^x - 1, the inverse of log10p1.
inline Var pow10m1(Var a) { return elementwise(UnaryOp::kPow10m1, a); }

Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);

/// Sum of all elements, as a 1x1 tensor.
Var sum(Var a);

/// x (r x c) plus a 1 x c row vector added to every row.
Var add_row(Var x, Var row);

/// Column-wise concatenation of matrices with equal row counts.
Var concat_cols(std::span<const Var> parts);
Var concat_cols(std::initializer_list<Var> parts);

/// Columns [begin, end) of a matrix.
Var slice_cols(Var a, std::size_t begin, std::size_t end);

/// Weighted mean aggregation over in-neighbours, batched over graphs.
///
/// `h` stacks the node embeddings of B graphs with `nodes` rows each;
/// `adjacency` stacks the B weight matrices the same way, entry (u, v) of a
/// block being the weight on edge u -> v. For node v of graph g the result
/// row is mean_{u : A[u,v] > 0} A[u,v] * h[u], or zero when v has no
/// in-neighbours. Only `h` is differentiated.
Var neighbor_mean(Var h, const Tensor& adjacency, std::size_t nodes);

/// GraphNorm over groups of `nodes` rows:
///   gamma_j * (h_vj - alpha_j * mu_j) / sqrt(var_j + eps) + beta_j
/// with mu_j and var_j the mean and (population) variance of column j within
/// a group. gamma, beta, alpha are 1 x d.
Var graph_norm(Var h, Var gamma, Var beta, Var alpha, std::size_t nodes, double eps);

}  // namespace aerograph
