#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aerograph/analysis/perturbation.hpp"
#include "aerograph/forecast/forecast.hpp"

namespace aerograph {

inline constexpr std::size_t kDefaultPolicyModels = 40;

enum class Quadrant { kQ1, kQ2, kQ3, kQ4 };
std::string_view quadrant_name(Quadrant q) noexcept;

struct Policy {
  std::size_t id = 0;
  Perturbation reductions;
};

struct PolicyResult {
  Policy policy;
  double avg_daily_flight_reduction = 0.0;  // raw flights per day
  double raw_impact = 0.0;                  // mean over models and windows
  double impact = 0.0;                      // normalized by the sweep maximum
  Quadrant quadrant = Quadrant::kQ3;
};

/// Ensemble-mean corrected raw forecasts with and without a policy.
struct PolicySeries {
  ForecastGrid unperturbed;  // [window][day][node]
  ForecastGrid perturbed;
};

/// Holds the unperturbed forecasts of a fixed (models, windows, days)
/// configuration so that many policies can be scored against them.
class PolicyEvaluator {
 public:
  /// `graphs` is the whole dataset: the flight reduction averages over all
  /// of its days. Throws ContractError for an empty ensemble or no windows.
  PolicyEvaluator(std::span<const Forecaster* const> models, std::span<const DailyGraph> graphs,
                  std::span<const WindowSample> windows, std::size_t days, const BiasFactors* bias);

  /// impact = mean over (model, window) of sum over days of the absolute
  /// change in the global corrected raw forecast. `impact` is left equal
  /// to `raw_impact`; normalization happens in the sweep.
  PolicyResult evaluate(const Policy& policy) const;
  PolicySeries series(const Perturbation& p) const;

  double flight_reduction(const Perturbation& p) const;
  std::size_t models() const { return models_.size(); }
  std::size_t windows() const { return windows_.size(); }
  std::size_t days() const { return days_; }
  std::size_t nodes() const { return graphs_.front().nodes(); }

 private:
  std::vector<ForecastGrid> forecasts(const Perturbation& p) const;  // [model]

  std::vector<const Forecaster*> models_;
  std::span<const DailyGraph> graphs_;
  std::vector<WindowSample> windows_;
  std::size_t days_;
  std::vector<double> bias_;  // per node, 1 when no factors were given
  std::vector<ForecastGrid> baseline_;
};

/// Every assignment of {0} and `levels` over `node_set` except all-zero,
/// in mixed-radix order with the first listed node varying slowest.
/// Throws ContractError for an empty node set, repeated nodes or a level
/// outside (0, 1].
std::vector<Policy> enumerate_policies(std::span<const std::size_t> node_set, std::span<const double> levels,
                                       std::size_t nodes = kRegionCount);

struct SweepThresholds {
  double max_raw_impact = 0.0;
  double median_reduction = 0.0;
  double median_impact = 0.0;
};

/// raw / max clamped to [0, 1]; 0 when the maximum is 0.
double normalize_impact(double raw_impact, const SweepThresholds& t);
/// Q1 high reduction and high impact, Q2 low/high, Q3 low/low, Q4 high/low;
/// ties with the median count as high.
Quadrant classify(double reduction, double impact, const SweepThresholds& t);

struct PolicySweepResult {
  std::vector<PolicyResult> results;
  SweepThresholds thresholds;
  std::size_t enumerated = 0;  // before sampling
};

/// Evaluates the enumerated grid (or a seeded sample of `max_policies` of it
/// when that is nonzero and smaller), normalizes impacts and assigns
/// quadrants by the median split.
PolicySweepResult policy_sweep(const PolicyEvaluator& evaluator, std::span<const std::size_t> node_set,
                               std::span<const double> levels, std::size_t max_policies = 0,
                               std::uint64_t seed = 1);

/// Normalization and quadrants for already-evaluated results.
SweepThresholds finalize_sweep(std::vector<PolicyResult>& results);

/// (policy_id, reductions, avg_daily_flight_reduction, impact, quadrant)
void write_policy_csv(std::ostream& out, const PolicySweepResult& sweep);
std::string policy_result_json(const PolicyResult& r);
std::string policy_sweep_json(const PolicySweepResult& sweep);

}  // namespace aerograph
