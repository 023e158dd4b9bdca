#pragma once

#include <span>
#include <string>
#include <vector>

#include "aerograph/dataio/dataset.hpp"
#include "aerograph/forecast/forecast.hpp"

namespace aerograph {

/// Per-node flight reduction fractions in [0, 1]. Raw flights on edge
/// (u, v) are scaled by (1 - r_u)(1 - r_v) before the log transform, so
/// r = 1 isolates a node.
class Perturbation {
 public:
  explicit Perturbation(std::size_t nodes = kRegionCount);
  static Perturbation isolate(std::size_t node, std::size_t nodes = kRegionCount, double fraction = 1.0);

  /// Throws ContractError for a fraction outside [0, 1] or a bad node.
  void set(std::size_t node, double fraction);
  double fraction(std::size_t node) const { return fractions_.at(node); }
  std::size_t nodes() const { return fractions_.size(); }
  std::span<const double> fractions() const { return fractions_; }

  double multiplier(std::size_t u, std::size_t v) const { return (1.0 - fractions_[u]) * (1.0 - fractions_[v]); }
  bool is_null() const;

  /// Transformed perturbed adjacency for one day.
  Tensor apply(const DailyGraph& graph) const;
  /// Raw flights removed on one day: sum of raw * (1 - multiplier).
  double flight_reduction(const DailyGraph& graph) const;
  AdjacencyFn adjacency_fn() const;

  /// "WE:0.75,NA:0.5" over the nonzero fractions (10-region graphs only);
  /// "null" for the null perturbation.
  std::string label() const;

 private:
  std::vector<double> fractions_;
};

/// Copies of `graphs` with perturbed flights (raw and transformed).
std::vector<DailyGraph> perturb_adjacency(std::span<const DailyGraph> graphs, const Perturbation& p);

}  // namespace aerograph
