#include "aerograph/numerics/ops.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "aerograph/errors.hpp"

namespace aerograph {
namespace {

constexpr double kLn10 = std::numbers::ln10;

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// out = a * b, or with transposes folded in. Loop order keeps each output
// element's reduction order independent of the number of rows, so batched
// and single-sample evaluation agree bit for bit.
Tensor gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b) {
  const std::size_t m = trans_a ? a.cols() : a.rows();
  const std::size_t k = trans_a ? a.rows() : a.cols();
  const std::size_t k2 = trans_b ? b.cols() : b.rows();
  const std::size_t n = trans_b ? b.rows() : b.cols();
  if (k != k2) {
    throw DimensionError("matmul: inner dimensions disagree, " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Tensor out({m, n});
  double* o = out.values().data();
  const double* av = a.values().data();
  const double* bv = b.values().data();
  const std::size_t a_cols = a.cols();
  const std::size_t b_cols = b.cols();
  // Every path accumulates out(i, j) over p in ascending order, so a row's
  // result never depends on how many other rows are in the batch.
  if (trans_b) {
    // A * B^T: B is a weight matrix here, so an explicit transpose is cheap
    // and lets the inner loop run over contiguous memory.
    Tensor bt({k, n});
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p = 0; p < k; ++p) bt.at(p, j) = bv[j * b_cols + p];
    }
    return gemm(a, trans_a, bt, false);
  } else if (trans_a) {
    // A^T * B: stream the shared row p of both operands.
    for (std::size_t p = 0; p < k; ++p) {
      const double* arow = av + p * a_cols;
      const double* brow = bv + p * b_cols;
      for (std::size_t i = 0; i < m; ++i) {
        const double aip = arow[i];
        if (aip == 0.0) continue;
        double* orow = o + i * n;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  } else {
    for (std::size_t i = 0; i < m; ++i) {
      double* orow = o + i * n;
      for (std::size_t p = 0; p < k; ++p) {
        const double aip = av[i * a_cols + p];
        if (aip == 0.0) continue;
        const double* brow = bv + p * b_cols;
        for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
      }
    }
  }
  return out;
}

double unary_value(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::kSigmoid:
      return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    case UnaryOp::kTanh:
      return std::tanh(x);
    case UnaryOp::kRelu:
      return x > 0.0 ? x : 0.0;
    case UnaryOp::kAbs:
      return std::fabs(x);
    case UnaryOp::kLog10p1:
      return x > -1.0 ? std::log10(x + 1.0) : std::nan("");
    case UnaryOp::kPow10m1:
      return std::pow(10.0, x) - 1.0;
  }
  return std::nan("");
}

double unary_derivative(UnaryOp op, double x) {
  switch (op) {
    case UnaryOp::kSigmoid: {
      const double s = unary_value(UnaryOp::kSigmoid, x);
      return s * (1.0 - s);
    }
    case UnaryOp::kTanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case UnaryOp::kRelu:
      return x > 0.0 ? 1.0 : 0.0;
    case UnaryOp::kAbs:
      return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    case UnaryOp::kLog10p1:
      return 1.0 / ((x + 1.0) * kLn10);
    case UnaryOp::kPow10m1:
      return std::pow(10.0, x) * kLn10;
  }
  return std::nan("");
}

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::kSigmoid: return "sigmoid";
    case UnaryOp::kTanh: return "tanh";
    case UnaryOp::kRelu: return "relu";
    case UnaryOp::kAbs: return "abs";
    case UnaryOp::kLog10p1: return "log10p1";
    case UnaryOp::kPow10m1: return "pow10m1";
  }
  return "unary";
}

const char* binary_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd: return "add";
    case BinaryOp::kSub: return "sub";
    case BinaryOp::kMul: return "mul";
  }
  return "binary";
}

Tape& common_tape(Var a, Var b) {
  Tape& t = a.tape();
  if (&b.tape() != &t) throw ContractError("operands recorded on different tapes");
  return t;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = common_tape(a, b);
  require_matrix(a.value(), "matmul");
  require_matrix(b.value(), "matmul");
  Tensor out = gemm(a.value(), false, b.value(), false);
  return tape.record("matmul", std::move(out), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) t.accumulate(a, gemm(g, false, b.value(), true));
    if (b.requires_grad()) t.accumulate(b, gemm(a.value(), true, g, false));
  });
}

Var elementwise(UnaryOp op, Var a) {
  const Tensor& x = a.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = unary_value(op, x[i]);
  return a.tape().record(unary_name(op), std::move(out), {a}, [a, op](Tape& t, const Tensor& g) {
    const Tensor& xv = a.value();
    Tensor d(xv.shape());
    for (std::size_t i = 0; i < xv.size(); ++i) d[i] = g[i] * unary_derivative(op, xv[i]);
    t.accumulate(a, d);
  });
}

Var elementwise(BinaryOp op, Var a, Var b) {
  Tape& tape = common_tape(a, b);
  require_same_shape(a.value(), b.value(), binary_name(op));
  const Tensor& x = a.value();
  const Tensor& y = b.value();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (op) {
      case BinaryOp::kAdd: out[i] = x[i] + y[i]; break;
      case BinaryOp::kSub: out[i] = x[i] - y[i]; break;
      case BinaryOp::kMul: out[i] = x[i] * y[i]; break;
    }
  }
  return tape.record(binary_name(op), std::move(out), {a, b}, [a, b, op](Tape& t, const Tensor& g) {
    switch (op) {
      case BinaryOp::kAdd:
        t.accumulate(a, g);
        t.accumulate(b, g);
        break;
      case BinaryOp::kSub: {
        t.accumulate(a, g);
        if (b.requires_grad()) {
          Tensor neg = g;
          for (double& v : neg.values()) v = -v;
          t.accumulate(b, neg);
        }
        break;
      }
      case BinaryOp::kMul: {
        if (a.requires_grad()) {
          Tensor da = g;
          for (std::size_t i = 0; i < da.size(); ++i) da[i] *= b.value()[i];
          t.accumulate(a, da);
        }
        if (b.requires_grad()) {
          Tensor db = g;
          for (std::size_t i = 0; i < db.size(); ++i) db[i] *= a.value()[i];
          t.accumulate(b, db);
        }
        break;
      }
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (double& v : out.values()) v *= factor;
  return a.tape().record("scale", std::move(out), {a}, [a, factor](Tape& t, const Tensor& g) {
    Tensor d = g;
    for (double& v : d.values()) v *= factor;
    t.accumulate(a, d);
  });
}

Var add_scalar(Var a, double offset) {
  Tensor out = a.value();
  for (double& v : out.values()) v += offset;
  return a.tape().record("add_scalar", std::move(out), {a}, [a](Tape& t, const Tensor& g) { t.accumulate(a, g); });
}

Var sum(Var a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  return a.tape().record("sum", Tensor::scalar(total), {a}, [a](Tape& t, const Tensor& g) {
    t.accumulate(a, Tensor(a.value().shape(), g.item()));
  });
}

Var add_row(Var x, Var row) {
  Tape& tape = common_tape(x, row);
  const Tensor& xv = x.value();
  const Tensor& rv = row.value();
  require_matrix(xv, "add_row");
  if (rv.rank() != 2 || rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw DimensionError("add_row: row " + shape_string(rv.shape()) + " does not match " + shape_string(xv.shape()));
  }
  Tensor out = xv;
  const std::size_t cols = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out.at(r, c) += rv[c];
  }
  return tape.record("add_row", std::move(out), {x, row}, [x, row](Tape& t, const Tensor& g) {
    t.accumulate(x, g);
    if (row.requires_grad()) {
      const std::size_t cols = g.cols();
      Tensor d({1, cols});
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) d[c] += g.at(r, c);
      }
      t.accumulate(row, d);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ContractError("concat_cols: nothing to concatenate");
  Tape& tape = parts.front().tape();
  const std::size_t rows = parts.front().value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (&p.tape() != &tape) throw ContractError("concat_cols: operands on different tapes");
    const Tensor& v = p.value();
    require_matrix(v, "concat_cols");
    if (v.rows() != rows) {
      throw DimensionError("concat_cols: row count " + std::to_string(v.rows()) + " vs " + std::to_string(rows));
    }
    widths.push_back(v.cols());
    total += v.cols();
  }
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& v = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < widths[k]; ++c) out.at(r, offset + c) = v.at(r, c);
    }
    offset += widths[k];
  }

  std::vector<Var> owned(parts.begin(), parts.end());
  return tape.record("concat_cols", std::move(out), parts, [owned, widths](Tape& t, const Tensor& g) {
    const std::size_t rows = g.rows();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < owned.size(); ++k) {
      if (owned[k].requires_grad()) {
        Tensor d({rows, widths[k]});
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < widths[k]; ++c) d.at(r, c) = g.at(r, offset + c);
        }
        t.accumulate(owned[k], d);
      }
      offset += widths[k];
    }
  });
}

Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& v = a.value();
  require_matrix(v, "slice_cols");
  if (begin > end || end > v.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                         shape_string(v.shape()));
  }
  const std::size_t rows = v.rows();
  const std::size_t width = end - begin;
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) out.at(r, c) = v.at(r, begin + c);
  }
  return a.tape().record("slice_cols", std::move(out), {a}, [a, begin, width](Tape& t, const Tensor& g) {
    Tensor d = Tensor::zeros_like(a.value());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < width; ++c) d.at(r, begin + c) = g.at(r, c);
    }
    t.accumulate(a, d);
  });
}

Var neighbor_mean(Var h, const Tensor& adjacency, std::size_t nodes) {
  const Tensor& hv = h.value();
  require_matrix(hv, "neighbor_mean");
  require_matrix(adjacency, "neighbor_mean");
  if (nodes == 0 || hv.rows() % nodes != 0 || adjacency.rows() != hv.rows() || adjacency.cols() != nodes) {
    throw DimensionError("neighbor_mean: embeddings " + shape_string(hv.shape()) + " and adjacency " +
                         shape_string(adjacency.shape()) + " are not " + std::to_string(nodes) + "-node blocks");
  }
  const std::size_t graphs = hv.rows() / nodes;
  const std::size_t dim = hv.cols();

  // coef(u, v) within each block: A[u,v] / |N(v)| for in-neighbours u.
  Tensor coef(adjacency.shape());
  for (std::size_t g = 0; g < graphs; ++g) {
    for (std::size_t v = 0; v < nodes; ++v) {
      std::size_t count = 0;
      for (std::size_t u = 0; u < nodes; ++u) {
        const double w = adjacency.at(g * nodes + u, v);
        if (w < 0.0 || !std::isfinite(w)) {
          throw DataError("neighbor_mean: invalid edge weight " + std::to_string(w) + " on edge " +
                          std::to_string(u) + " -> " + std::to_string(v));
        }
        if (w > 0.0) ++count;
      }
      if (count == 0) continue;
      for (std::size_t u = 0; u < nodes; ++u) {
        const double w = adjacency.at(g * nodes + u, v);
        if (w > 0.0) coef.at(g * nodes + u, v) = w / static_cast<double>(count);
      }
    }
  }

  Tensor out({hv.rows(), dim});
  for (std::size_t g = 0; g < graphs; ++g) {
    for (std::size_t v = 0; v < nodes; ++v) {
      double* orow = &out.at(g * nodes + v, 0);
      for (std::size_t u = 0; u < nodes; ++u) {
        const double c = coef.at(g * nodes + u, v);
        if (c == 0.0) continue;
        const double* hrow = hv.data().data() + (g * nodes + u) * dim;
        for (std::size_t j = 0; j < dim; ++j) orow[j] += c * hrow[j];
      }
    }
  }

  return h.tape().record("neighbor_mean", std::move(out), {h},
                         [h, coef = std::move(coef), nodes, graphs, dim](Tape& t, const Tensor& g) {
                           Tensor d = Tensor::zeros_like(h.value());
                           for (std::size_t b = 0; b < graphs; ++b) {
                             for (std::size_t u = 0; u < nodes; ++u) {
                               double* drow = &d.at(b * nodes + u, 0);
                               for (std::size_t v = 0; v < nodes; ++v) {
                                 const double c = coef.at(b * nodes + u, v);
                                 if (c == 0.0) continue;
                                 const double* grow = g.data().data() + (b * nodes + v) * dim;
                                 for (std::size_t j = 0; j < dim; ++j) drow[j] += c * grow[j];
                               }
                             }
                           }
                           t.accumulate(h, d);
                         });
}

Var graph_norm(Var h, Var gamma, Var beta, Var alpha, std::size_t nodes, double eps) {
  Tape& tape = common_tape(h, gamma);
  common_tape(h, beta);
  common_tape(h, alpha);
  const Tensor& hv = h.value();
  require_matrix(hv, "graph_norm");
  const std::size_t dim = hv.cols();
  for (const Var* p : {&gamma, &beta, &alpha}) {
    const Tensor& pv = p->value();
    if (pv.rank() != 2 || pv.rows() != 1 || pv.cols() != dim) {
      throw DimensionError("graph_norm: parameter " + shape_string(pv.shape()) + " for features " +
                           shape_string(hv.shape()));
    }
  }
  if (nodes == 0 || hv.rows() % nodes != 0) {
    throw DimensionError("graph_norm: " + std::to_string(hv.rows()) + " rows are not " + std::to_string(nodes) +
                         "-node blocks");
  }
  if (!(eps > 0.0)) throw ContractError("graph_norm: eps must be positive");
  const std::size_t graphs = hv.rows() / nodes;
  const double n = static_cast<double>(nodes);

  // Per (graph, feature) statistics, kept for the backward pass.
  Tensor mean({graphs, dim});
  Tensor stddev({graphs, dim});
  for (std::size_t g = 0; g < graphs; ++g) {
    for (std::size_t j = 0; j < dim; ++j) {
      double m = 0.0;
      for (std::size_t v = 0; v < nodes; ++v) m += hv.at(g * nodes + v, j);
      m /= n;
      double var = 0.0;
      for (std::size_t v = 0; v < nodes; ++v) {
        const double c = hv.at(g * nodes + v, j) - m;
        var += c * c;
      }
      var /= n;
      mean.at(g, j) = m;
      stddev.at(g, j) = std::sqrt(var + eps);
    }
  }

  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  const Tensor& av = alpha.value();
  Tensor out({hv.rows(), dim});
  for (std::size_t g = 0; g < graphs; ++g) {
    for (std::size_t v = 0; v < nodes; ++v) {
      for (std::size_t j = 0; j < dim; ++j) {
        const std::size_t r = g * nodes + v;
        out.at(r, j) = gv[j] * (hv.at(r, j) - av[j] * mean.at(g, j)) / stddev.at(g, j) + bv[j];
      }
    }
  }

  auto backward = [h, gamma, beta, alpha, nodes, graphs, dim, mean = std::move(mean),
                   stddev = std::move(stddev)](Tape& t, const Tensor& grad) {
    const Tensor& x = h.value();
    const Tensor& gm = gamma.value();
    const Tensor& al = alpha.value();
    const double n = static_cast<double>(nodes);
    Tensor dh = Tensor::zeros_like(x);
    Tensor dgamma({1, dim});
    Tensor dbeta({1, dim});
    Tensor dalpha({1, dim});
    for (std::size_t g = 0; g < graphs; ++g) {
      for (std::size_t j = 0; j < dim; ++j) {
        const double mu = mean.at(g, j);
        const double s = stddev.at(g, j);
        double sum_g = 0.0;
        double sum_gc = 0.0;
        for (std::size_t v = 0; v < nodes; ++v) {
          const std::size_t r = g * nodes + v;
          sum_g += grad.at(r, j);
          sum_gc += grad.at(r, j) * (x.at(r, j) - al[j] * mu);
        }
        dbeta[j] += sum_g;
        dgamma[j] += sum_gc / s;
        dalpha[j] += -mu * gm[j] * sum_g / s;
        const double d_s = -gm[j] * sum_gc / (s * s);
        for (std::size_t v = 0; v < nodes; ++v) {
          const std::size_t r = g * nodes + v;
          dh.at(r, j) = gm[j] * grad.at(r, j) / s - al[j] * gm[j] * sum_g / (n * s) +
                        d_s * (x.at(r, j) - mu) / (n * s);
        }
      }
    }
    t.accumulate(h, dh);
    t.accumulate(gamma, dgamma);
    t.accumulate(beta, dbeta);
    t.accumulate(alpha, dalpha);
  };
  return tape.record("graph_norm", std::move(out), {h, gamma, beta, alpha}, std::move(backward));
}

}  // namespace aerograph
