#include "aerograph/analysis/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "aerograph/errors.hpp"
#include "aerograph/numerics/parallel.hpp"
#include "json.hpp"

namespace aerograph {

ForecastGrid corrected_forecast(const Forecaster& model, const ForecastInputs& inputs, const BiasFactors* bias) {
  ForecastGrid grid = recursive_predict(model, inputs);
  for (auto& window : grid) {
    for (auto& day : window) {
      for (std::size_t v = 0; v < day.size(); ++v) {
        day[v] = to_raw(day[v]);
        if (bias) day[v] *= bias->factor.at(v);
      }
    }
  }
  return grid;
}

std::vector<double> forecast_distance(const ForecastGrid& a, const ForecastGrid& b,
                                      std::optional<std::size_t> excluded) {
  if (a.size() != b.size()) throw DimensionError("forecast_distance: window counts differ");
  std::vector<double> out(a.size(), 0.0);
  for (std::size_t w = 0; w < a.size(); ++w) {
    for (std::size_t d = 0; d < a[w].size(); ++d) {
      for (std::size_t v = 0; v < a[w][d].size(); ++v) {
        if (excluded && *excluded == v) continue;
        out[w] += std::abs(a[w][d][v] - b[w][d][v]);
      }
    }
  }
  return out;
}

namespace {

// Global (all-node) totals per [window][day].
std::vector<std::vector<double>> global_totals(const ForecastGrid& g) {
  std::vector<std::vector<double>> out(g.size());
  for (std::size_t w = 0; w < g.size(); ++w) {
    for (const auto& day : g[w]) out[w].push_back(std::accumulate(day.begin(), day.end(), 0.0));
  }
  return out;
}

struct ModelScores {
  std::vector<std::vector<double>> scores;  // [window][node]
  std::vector<std::vector<double>> signed_global;  // [window][node], summed over days
};

ModelScores score_model(const Forecaster& model, std::span<const DailyGraph> graphs,
                        std::span<const WindowSample> windows, std::size_t days, const BiasFactors* bias,
                        double fraction) {
  if (graphs.empty()) throw ContractError("sensitivity: no graphs");
  const std::size_t nodes = graphs.front().nodes();
  const ForecastGrid base = corrected_forecast(model, forecast_inputs(graphs, windows, days), bias);
  const auto base_total = global_totals(base);
  ModelScores out;
  out.scores.assign(windows.size(), std::vector<double>(nodes, 0.0));
  out.signed_global.assign(windows.size(), std::vector<double>(nodes, 0.0));
  for (std::size_t s = 0; s < nodes; ++s) {
    const Perturbation p = Perturbation::isolate(s, nodes, fraction);
    const ForecastGrid pert = corrected_forecast(model, forecast_inputs(graphs, windows, days, p.adjacency_fn()), bias);
    const std::vector<double> dist = forecast_distance(base, pert, s);
    const auto pert_total = global_totals(pert);
    for (std::size_t w = 0; w < windows.size(); ++w) {
      out.scores[w][s] = dist[w];
      for (std::size_t d = 0; d < days; ++d) out.signed_global[w][s] += base_total[w][d] - pert_total[w][d];
    }
  }
  return out;
}

}  // namespace

double node_sensitivity(const Forecaster& model, std::span<const DailyGraph> graphs, const WindowSample& window,
                        std::size_t node, std::size_t days, const BiasFactors* bias) {
  if (graphs.empty() || node >= graphs.front().nodes()) throw ContractError("node_sensitivity: node out of range");
  const std::vector<WindowSample> one{window};
  const ForecastGrid base = corrected_forecast(model, forecast_inputs(graphs, one, days), bias);
  const Perturbation p = Perturbation::isolate(node, graphs.front().nodes());
  const ForecastGrid pert = corrected_forecast(model, forecast_inputs(graphs, one, days, p.adjacency_fn()), bias);
  return forecast_distance(base, pert, node).front();
}

std::vector<std::vector<double>> sensitivity_scores(const Forecaster& model, std::span<const DailyGraph> graphs,
                                                    std::span<const WindowSample> windows, std::size_t days,
                                                    const BiasFactors* bias, double fraction) {
  return score_model(model, graphs, windows, days, bias, fraction).scores;
}

std::vector<std::size_t> descending_ranks(std::span<const double> values) {
  std::vector<std::size_t> ranks(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    ranks[i] = 1 + static_cast<std::size_t>(
                       std::count_if(values.begin(), values.end(), [&](double v) { return v > values[i]; }));
  }
  return ranks;
}

std::vector<std::size_t> SensitivityResult::ordering() const {
  std::vector<std::size_t> order(nodes);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return median_mu[a] > median_mu[b]; });
  return order;
}

const std::vector<SensitivityRecord>& SensitivityResult::window(Date start) const {
  for (std::size_t w = 0; w < windows.size(); ++w) {
    if (windows[w].start == start) return records[w];
  }
  throw ContractError("sensitivity: no window starting " + start.iso());
}

SensitivityResult sensitivity_sweep(std::span<const Forecaster* const> ensemble, std::span<const DailyGraph> graphs,
                                    std::span<const WindowSample> windows, std::size_t days,
                                    const BiasFactors* bias) {
  if (ensemble.empty()) throw ContractError("sensitivity_sweep: empty ensemble");
  if (windows.empty()) throw ContractError("sensitivity_sweep: no windows");
  std::vector<ModelScores> per_model(ensemble.size());
  parallel_for(ensemble.size(),
               [&](std::size_t m) { per_model[m] = score_model(*ensemble[m], graphs, windows, days, bias, 1.0); });

  SensitivityResult r;
  r.windows.assign(windows.begin(), windows.end());
  r.nodes = graphs.front().nodes();
  r.days = days;
  r.models = ensemble.size();
  r.records.resize(windows.size());
  r.mu_min = INFINITY;
  r.mu_max = -INFINITY;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    for (std::size_t s = 0; s < r.nodes; ++s) {
      SensitivityRecord rec;
      rec.window = windows[w];
      rec.node = s;
      for (const ModelScores& ms : per_model) rec.scores.push_back(ms.scores[w][s]);
      rec.fit = fit_gumbel(rec.scores);
      if (rec.fit.degenerate) ++r.degenerate_fits;
      r.mu_min = std::min(r.mu_min, rec.fit.mu);
      r.mu_max = std::max(r.mu_max, rec.fit.mu);
      r.records[w].push_back(std::move(rec));
    }
  }

  // A constant mu everywhere normalizes to 0.
  const double span = r.mu_max - r.mu_min;
  std::vector<std::vector<double>> normalized(r.nodes);
  for (auto& row : r.records) {
    std::vector<double> mus;
    for (SensitivityRecord& rec : row) {
      rec.mu_normalized = span > 0.0 ? (rec.fit.mu - r.mu_min) / span : 0.0;
      mus.push_back(rec.fit.mu);
      normalized[rec.node].push_back(rec.mu_normalized);
    }
    const auto ranks = descending_ranks(mus);
    for (std::size_t s = 0; s < row.size(); ++s) row[s].rank = ranks[s];
  }
  for (std::size_t s = 0; s < r.nodes; ++s) r.median_mu.push_back(median(normalized[s]));
  r.overall = descending_ranks(r.median_mu);

  r.fidelity.assign(r.nodes, 0.0);
  const double per_window = static_cast<double>(ensemble.size() * days);
  for (std::size_t s = 0; s < r.nodes; ++s) {
    for (std::size_t w = 0; w < windows.size(); ++w) {
      double total = 0.0;
      for (const ModelScores& ms : per_model) total += ms.signed_global[w][s];
      r.fidelity[s] += total / per_window;
    }
    r.fidelity[s] /= static_cast<double>(windows.size());
  }
  return r;
}

std::string node_label(std::size_t node, std::size_t nodes) {
  if (nodes == kRegionCount) return std::string(region_code(region_at(node)));
  return std::to_string(node);
}

void write_sensitivity_csv(std::ostream& out, const SensitivityResult& result) {
  out << "window_start,region,mu,mu_normalized,rank\n";
  out.precision(17);
  for (const auto& row : result.records) {
    for (const SensitivityRecord& rec : row) {
      out << rec.window.start.iso() << ',' << node_label(rec.node, result.nodes) << ',' << rec.fit.mu << ','
          << rec.mu_normalized << ',' << rec.rank << '\n';
    }
  }
}

std::string sensitivity_json(const SensitivityResult& result) {
  nlohmann::json windows = nlohmann::json::array();
  for (const auto& row : result.records) {
    nlohmann::json regions = nlohmann::json::array();
    for (const SensitivityRecord& rec : row) {
      regions.push_back({{"region", node_label(rec.node, result.nodes)},
                         {"scores", rec.scores},
                         {"mu", rec.fit.mu},
                         {"beta", rec.fit.beta},
                         {"degenerate", rec.fit.degenerate},
                         {"mu_normalized", rec.mu_normalized},
                         {"rank", rec.rank}});
    }
    windows.push_back({{"window_start", row.front().window.start.iso()}, {"regions", regions}});
  }
  nlohmann::json overall = nlohmann::json::array();
  for (std::size_t s : result.ordering()) {
    overall.push_back({{"region", node_label(s, result.nodes)},
                       {"median_mu_normalized", result.median_mu[s]},
                       {"rank", result.overall[s]},
                       {"fidelity", result.fidelity[s]}});
  }
  const nlohmann::json j{{"days", result.days},
                         {"models", result.models},
                         {"mu_min", result.mu_min},
                         {"mu_max", result.mu_max},
                         {"degenerate_fits", result.degenerate_fits},
                         {"overall", overall},
                         {"windows", windows}};
  return j.dump();
}

}  // namespace aerograph
