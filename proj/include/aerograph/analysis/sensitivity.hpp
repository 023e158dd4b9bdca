#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerograph/analysis/perturbation.hpp"
#include "aerograph/analysis/stats.hpp"
#include "aerograph/forecast/forecast.hpp"

namespace aerograph {

/// Raw-domain forecasts of one model, floored at zero and multiplied by the
/// bias factors when given. [window][day][node].
ForecastGrid corrected_forecast(const Forecaster& model, const ForecastInputs& inputs, const BiasFactors* bias);

/// Per window: sum over days and over every node except `excluded` of
/// |a - b|.
std::vector<double> forecast_distance(const ForecastGrid& a, const ForecastGrid& b,
                                      std::optional<std::size_t> excluded);

/// Sum over the other nodes and all `days` forecast days of the absolute
/// change in corrected raw predictions when `node` is isolated (on the seed
/// days and every forecast day).
double node_sensitivity(const Forecaster& model, std::span<const DailyGraph> graphs, const WindowSample& window,
                        std::size_t node, std::size_t days = kDefaultHorizon, const BiasFactors* bias = nullptr);

/// [window][node] sensitivity of one model with each node in turn reduced
/// by `fraction` (1 = isolation), batched over windows.
std::vector<std::vector<double>> sensitivity_scores(const Forecaster& model, std::span<const DailyGraph> graphs,
                                                    std::span<const WindowSample> windows,
                                                    std::size_t days = kDefaultHorizon,
                                                    const BiasFactors* bias = nullptr, double fraction = 1.0);

/// 1 for the largest value; equal values share the smaller rank number.
std::vector<std::size_t> descending_ranks(std::span<const double> values);

struct SensitivityRecord {
  WindowSample window;
  std::size_t node = 0;
  std::vector<double> scores;  // one per ensemble member
  GumbelFit fit;
  double mu_normalized = 0.0;
  std::size_t rank = 0;  // within the window, by mu
};

struct SensitivityResult {
  std::vector<WindowSample> windows;
  std::size_t nodes = 0;
  std::size_t days = 0;
  std::size_t models = 0;
  std::vector<std::vector<SensitivityRecord>> records;  // [window][node]
  double mu_min = 0.0;  // range used for the global min-max normalization
  double mu_max = 0.0;
  std::vector<double> median_mu;     // per node, median normalized mu over windows
  std::vector<std::size_t> overall;  // per node rank by median_mu
  /// Per node: mean over windows, models and days of the signed change in
  /// the global (all-node) prediction under isolation. Diagnostic only.
  std::vector<double> fidelity;
  std::size_t degenerate_fits = 0;

  /// Nodes from most to least sensitive (ties by node index).
  std::vector<std::size_t> ordering() const;
  /// Throws ContractError for an unknown window.
  const std::vector<SensitivityRecord>& window(Date start) const;
};

/// Scores from every member for each (window, node), Gumbel mu per pair,
/// global min-max normalization, per-window ranks and the ranking by median.
SensitivityResult sensitivity_sweep(std::span<const Forecaster* const> ensemble, std::span<const DailyGraph> graphs,
                                    std::span<const WindowSample> windows, std::size_t days = kDefaultHorizon,
                                    const BiasFactors* bias = nullptr);

/// (window_start, region, mu, mu_normalized, rank)
void write_sensitivity_csv(std::ostream& out, const SensitivityResult& result);
/// Everything in the CSV plus per-model scores, Gumbel scale and the
/// overall ranking.
std::string sensitivity_json(const SensitivityResult& result);

/// Node label: the region code for 10-node graphs, the index otherwise.
std::string node_label(std::size_t node, std::size_t nodes);

}  // namespace aerograph
