#include "aerograph/analysis/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aerograph/errors.hpp"

namespace aerograph {

Perturbation::Perturbation(std::size_t nodes) : fractions_(nodes, 0.0) {}

Perturbation Perturbation::isolate(std::size_t node, std::size_t nodes, double fraction) {
  Perturbation p(nodes);
  p.set(node, fraction);
  return p;
}

void Perturbation::set(std::size_t node, double fraction) {
  if (node >= fractions_.size()) {
    throw ContractError("Perturbation: node " + std::to_string(node) + " out of range");
  }
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw ContractError("Perturbation: fraction " + std::to_string(fraction) + " outside [0, 1]");
  }
  fractions_[node] = fraction;
}

bool Perturbation::is_null() const {
  return std::all_of(fractions_.begin(), fractions_.end(), [](double r) { return r == 0.0; });
}

Tensor Perturbation::apply(const DailyGraph& graph) const {
  const std::size_t n = graph.nodes();
  if (n != fractions_.size()) {
    throw ContractError("Perturbation: graph has " + std::to_string(n) + " nodes, perturbation " +
                        std::to_string(fractions_.size()));
  }
  if (is_null()) return graph.flights;
  Tensor out({n, n});
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      const double m = multiplier(u, v);
      out.at(u, v) = m == 1.0 ? graph.flights.at(u, v) : log10p1(graph.raw_flights.at(u, v) * m);
    }
  }
  return out;
}

double Perturbation::flight_reduction(const DailyGraph& graph) const {
  const std::size_t n = graph.nodes();
  double removed = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) removed += graph.raw_flights.at(u, v) * (1.0 - multiplier(u, v));
  }
  return removed;
}

AdjacencyFn Perturbation::adjacency_fn() const {
  return [p = *this](const DailyGraph& g) { return p.apply(g); };
}

std::string Perturbation::label() const {
  if (is_null()) return "null";
  std::ostringstream out;
  bool first = true;
  for (std::size_t i = 0; i < fractions_.size(); ++i) {
    if (fractions_[i] == 0.0) continue;
    if (!first) out << ',';
    first = false;
    if (fractions_.size() == kRegionCount) {
      out << region_code(region_at(i));
    } else {
      out << i;
    }
    out << ':' << fractions_[i];
  }
  return out.str();
}

std::vector<DailyGraph> perturb_adjacency(std::span<const DailyGraph> graphs, const Perturbation& p) {
  std::vector<DailyGraph> out(graphs.begin(), graphs.end());
  for (DailyGraph& g : out) {
    g.flights = p.apply(g);
    const std::size_t n = g.nodes();
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) g.raw_flights.at(u, v) *= p.multiplier(u, v);
    }
  }
  return out;
}

}  // namespace aerograph
