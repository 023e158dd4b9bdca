#include "aerograph/analysis/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "aerograph/analysis/sensitivity.hpp"
#include "aerograph/analysis/stats.hpp"
#include "aerograph/errors.hpp"
#include "aerograph/numerics/parallel.hpp"
#include "json.hpp"

namespace aerograph {

std::string_view quadrant_name(Quadrant q) noexcept {
  switch (q) {
    case Quadrant::kQ1: return "Q1";
    case Quadrant::kQ2: return "Q2";
    case Quadrant::kQ3: return "Q3";
    case Quadrant::kQ4: return "Q4";
  }
  return "?";
}

PolicyEvaluator::PolicyEvaluator(std::span<const Forecaster* const> models, std::span<const DailyGraph> graphs,
                                 std::span<const WindowSample> windows, std::size_t days, const BiasFactors* bias)
    : models_(models.begin(), models.end()), graphs_(graphs), windows_(windows.begin(), windows.end()), days_(days) {
  if (models_.empty()) throw ContractError("PolicyEvaluator: no models");
  if (windows_.empty()) throw ContractError("PolicyEvaluator: no windows");
  if (graphs_.empty()) throw ContractError("PolicyEvaluator: no graphs");
  bias_.assign(nodes(), 1.0);
  if (bias) {
    for (std::size_t v = 0; v < nodes(); ++v) bias_[v] = bias->factor.at(v);
  }
  baseline_ = forecasts(Perturbation(nodes()));
}

std::vector<ForecastGrid> PolicyEvaluator::forecasts(const Perturbation& p) const {
  const ForecastInputs inputs = forecast_inputs(graphs_, windows_, days_, p.adjacency_fn());
  std::vector<ForecastGrid> out(models_.size());
  parallel_for(models_.size(), [&](std::size_t m) {
    ForecastGrid g = recursive_predict(*models_[m], inputs);
    for (auto& window : g) {
      for (auto& day : window) {
        for (std::size_t v = 0; v < day.size(); ++v) day[v] = to_raw(day[v]) * bias_[v];
      }
    }
    out[m] = std::move(g);
  });
  return out;
}

double PolicyEvaluator::flight_reduction(const Perturbation& p) const {
  double total = 0.0;
  for (const DailyGraph& g : graphs_) total += p.flight_reduction(g);
  return total / static_cast<double>(graphs_.size());
}

PolicyResult PolicyEvaluator::evaluate(const Policy& policy) const {
  if (policy.reductions.nodes() != nodes()) throw ContractError("PolicyEvaluator: policy node count mismatch");
  PolicyResult r;
  r.policy = policy;
  r.avg_daily_flight_reduction = flight_reduction(policy.reductions);
  if (policy.reductions.is_null()) return r;
  const std::vector<ForecastGrid> pert = forecasts(policy.reductions);
  double total = 0.0;
  for (std::size_t m = 0; m < models_.size(); ++m) {
    for (std::size_t w = 0; w < windows_.size(); ++w) {
      double window_sum = 0.0;
      for (std::size_t d = 0; d < days_; ++d) {
        const auto& a = baseline_[m][w][d];
        const auto& b = pert[m][w][d];
        window_sum += std::abs(std::accumulate(b.begin(), b.end(), 0.0) - std::accumulate(a.begin(), a.end(), 0.0));
      }
      total += window_sum;
    }
  }
  r.raw_impact = total / static_cast<double>(models_.size() * windows_.size());
  r.impact = r.raw_impact;
  return r;
}

PolicySeries PolicyEvaluator::series(const Perturbation& p) const {
  auto mean = [&](const std::vector<ForecastGrid>& grids) {
    RawForecasts rf;
    rf.models = grids;
    return ensemble_mean(rf);
  };
  return {mean(baseline_), mean(forecasts(p))};
}

std::vector<Policy> enumerate_policies(std::span<const std::size_t> node_set, std::span<const double> levels,
                                       std::size_t nodes) {
  if (node_set.empty()) throw ContractError("enumerate_policies: empty node set");
  if (levels.empty()) throw ContractError("enumerate_policies: no levels");
  std::set<std::size_t> seen;
  for (std::size_t n : node_set) {
    if (n >= nodes) throw ContractError("enumerate_policies: node " + std::to_string(n) + " out of range");
    if (!seen.insert(n).second) throw ContractError("enumerate_policies: node " + std::to_string(n) + " repeated");
  }
  for (double l : levels) {
    if (!(l > 0.0 && l <= 1.0)) throw ContractError("enumerate_policies: level " + std::to_string(l) + " outside (0, 1]");
  }
  const std::size_t radix = levels.size() + 1;
  std::size_t total = 1;
  for (std::size_t i = 0; i < node_set.size(); ++i) {
    if (total > (std::size_t{1} << 40) / radix) throw ContractError("enumerate_policies: grid too large");
    total *= radix;
  }
  std::vector<Policy> out;
  out.reserve(total - 1);
  for (std::size_t code = 1; code < total; ++code) {
    Policy p{out.size(), Perturbation(nodes)};
    std::size_t rest = code;
    for (std::size_t i = node_set.size(); i-- > 0;) {
      const std::size_t digit = rest % radix;
      rest /= radix;
      if (digit > 0) p.reductions.set(node_set[i], levels[digit - 1]);
    }
    out.push_back(std::move(p));
  }
  return out;
}

double normalize_impact(double raw_impact, const SweepThresholds& t) {
  if (!(t.max_raw_impact > 0.0)) return 0.0;
  return std::clamp(raw_impact / t.max_raw_impact, 0.0, 1.0);
}

Quadrant classify(double reduction, double impact, const SweepThresholds& t) {
  const bool high_reduction = reduction >= t.median_reduction;
  const bool high_impact = impact >= t.median_impact;
  if (high_impact) return high_reduction ? Quadrant::kQ1 : Quadrant::kQ2;
  return high_reduction ? Quadrant::kQ4 : Quadrant::kQ3;
}

SweepThresholds finalize_sweep(std::vector<PolicyResult>& results) {
  if (results.empty()) throw ContractError("finalize_sweep: no results");
  SweepThresholds t;
  for (const PolicyResult& r : results) t.max_raw_impact = std::max(t.max_raw_impact, r.raw_impact);
  std::vector<double> reductions, impacts;
  for (PolicyResult& r : results) {
    // Exactly 1 for the maximum, not raw / max rounded.
    r.impact = r.raw_impact == t.max_raw_impact && t.max_raw_impact > 0.0 ? 1.0 : normalize_impact(r.raw_impact, t);
    reductions.push_back(r.avg_daily_flight_reduction);
    impacts.push_back(r.impact);
  }
  t.median_reduction = median(reductions);
  t.median_impact = median(impacts);
  for (PolicyResult& r : results) r.quadrant = classify(r.avg_daily_flight_reduction, r.impact, t);
  return t;
}

PolicySweepResult policy_sweep(const PolicyEvaluator& evaluator, std::span<const std::size_t> node_set,
                               std::span<const double> levels, std::size_t max_policies, std::uint64_t seed) {
  std::vector<Policy> policies = enumerate_policies(node_set, levels, evaluator.nodes());
  PolicySweepResult sweep;
  sweep.enumerated = policies.size();
  if (max_policies > 0 && max_policies < policies.size()) {
    std::mt19937_64 rng(seed);
    std::shuffle(policies.begin(), policies.end(), rng);
    policies.resize(max_policies);
    std::sort(policies.begin(), policies.end(), [](const Policy& a, const Policy& b) { return a.id < b.id; });
  }
  for (const Policy& p : policies) sweep.results.push_back(evaluator.evaluate(p));
  sweep.thresholds = finalize_sweep(sweep.results);
  return sweep;
}

void write_policy_csv(std::ostream& out, const PolicySweepResult& sweep) {
  out << "policy_id,reductions,avg_daily_flight_reduction,impact,quadrant\n";
  out.precision(17);
  for (const PolicyResult& r : sweep.results) {
    out << r.policy.id << ",\"" << r.policy.reductions.label() << "\"," << r.avg_daily_flight_reduction << ','
        << r.impact << ',' << quadrant_name(r.quadrant) << '\n';
  }
}

namespace {

nlohmann::json result_to_json(const PolicyResult& r) {
  nlohmann::json reductions = nlohmann::json::object();
  const auto fr = r.policy.reductions.fractions();
  for (std::size_t i = 0; i < fr.size(); ++i) {
    if (fr[i] != 0.0) reductions[node_label(i, fr.size())] = fr[i];
  }
  return {{"policy_id", r.policy.id},
          {"reductions", reductions},
          {"avg_daily_flight_reduction", r.avg_daily_flight_reduction},
          {"raw_impact", r.raw_impact},
          {"impact", r.impact},
          {"quadrant", quadrant_name(r.quadrant)}};
}

}  // namespace

std::string policy_result_json(const PolicyResult& r) { return result_to_json(r).dump(); }

std::string policy_sweep_json(const PolicySweepResult& sweep) {
  nlohmann::json results = nlohmann::json::array();
  for (const PolicyResult& r : sweep.results) results.push_back(result_to_json(r));
  const nlohmann::json j{{"enumerated", sweep.enumerated},
                         {"evaluated", sweep.results.size()},
                         {"max_raw_impact", sweep.thresholds.max_raw_impact},
                         {"median_reduction", sweep.thresholds.median_reduction},
                         {"median_impact", sweep.thresholds.median_impact},
                         {"results", results}};
  return j.dump();
}

}  // namespace aerograph
