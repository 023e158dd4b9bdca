#include "aerograph/forecast/forecast.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "aerograph/errors.hpp"
#include "aerograph/numerics/parallel.hpp"
#include "json.hpp"

namespace aerograph {

std::vector<const Forecaster*> members(std::span<const ModelCheckpoint> ensemble) {
  std::vector<const Forecaster*> out;
  out.reserve(ensemble.size());
  for (const ModelCheckpoint& c : ensemble) out.push_back(&c.model);
  return out;
}

std::vector<WindowSample> forecastable_windows(std::span<const DailyGraph> graphs, std::size_t days,
                                               std::size_t window_days) {
  std::vector<WindowSample> out;
  for (std::size_t i = 0; i + window_days + days <= graphs.size(); ++i) {
    if (consecutive_days(graphs, i, window_days + days)) out.push_back({i, graphs[i].date});
  }
  return out;
}

ForecastInputs forecast_inputs(std::span<const DailyGraph> graphs, std::span<const WindowSample> windows,
                               std::size_t days, const AdjacencyFn& adjacency, std::size_t window_days) {
  if (days == 0) throw ContractError("forecast_inputs: horizon must be at least 1 day");
  auto adj = [&](const DailyGraph& g) { return adjacency ? adjacency(g) : g.flights; };
  ForecastInputs in;
  in.days = days;
  for (const WindowSample& w : windows) {
    if (!consecutive_days(graphs, w.first, window_days + days)) {
      throw ContractError("forecast_inputs: window " + w.start.iso() + " lacks " + std::to_string(days) +
                          " consecutive forecast days");
    }
    GraphSequence seed;
    for (std::size_t d = 0; d < window_days; ++d) {
      seed.features.push_back(graphs[w.first + d].cases);
      seed.adjacency.push_back(adj(graphs[w.first + d]));
    }
    std::vector<Tensor> future;
    for (std::size_t k = 0; k < days; ++k) future.push_back(adj(graphs[w.first + window_days + k]));
    in.windows.push_back(w);
    in.seeds.push_back(std::move(seed));
    in.future.push_back(std::move(future));
  }
  return in;
}

ForecastGrid recursive_predict(const Forecaster& model, const ForecastInputs& inputs) {
  if (inputs.days == 0) throw ContractError("recursive_predict: horizon must be at least 1 day");
  const std::size_t windows = inputs.seeds.size();
  if (windows == 0) return {};
  if (inputs.future.size() != windows) throw ContractError("recursive_predict: adjacency missing for some window");
  for (std::size_t w = 0; w < windows; ++w) {
    if (inputs.future[w].size() < inputs.days) {
      throw ContractError("recursive_predict: window " + std::to_string(w) + " has adjacency for " +
                          std::to_string(inputs.future[w].size()) + " of " + std::to_string(inputs.days) + " days");
    }
  }
  std::vector<GraphSequence> buffers = inputs.seeds;
  const std::size_t nodes = buffers.front().nodes();
  ForecastGrid out(windows, std::vector<std::vector<double>>(inputs.days, std::vector<double>(nodes)));
  for (std::size_t k = 0; k < inputs.days; ++k) {
    const Tensor pred = model.predict(stack_sequences(buffers));
    for (std::size_t w = 0; w < windows; ++w) {
      std::vector<double> next(nodes);
      for (std::size_t v = 0; v < nodes; ++v) next[v] = pred[w * nodes + v];
      out[w][k] = next;
      if (k + 1 == inputs.days) continue;
      GraphSequence& buf = buffers[w];
      buf.features.erase(buf.features.begin());
      buf.adjacency.erase(buf.adjacency.begin());
      buf.features.push_back(std::move(next));
      buf.adjacency.push_back(inputs.future[w][k]);
    }
  }
  return out;
}

double to_raw(double transformed, std::size_t* floors) {
  const double raw = pow10m1(transformed);
  if (raw < 0.0) {
    if (floors) ++*floors;
    return 0.0;
  }
  return raw;
}

RawForecasts ensemble_raw_forecasts(std::span<const Forecaster* const> ensemble, const ForecastInputs& inputs) {
  if (ensemble.empty()) throw ContractError("ensemble_raw_forecasts: empty ensemble");
  RawForecasts out;
  out.models.resize(ensemble.size());
  std::vector<std::size_t> floors(ensemble.size(), 0);
  parallel_for(ensemble.size(), [&](std::size_t m) {
    ForecastGrid grid = recursive_predict(*ensemble[m], inputs);
    for (auto& window : grid) {
      for (auto& day : window) {
        for (double& v : day) v = to_raw(v, &floors[m]);
      }
    }
    out.models[m] = std::move(grid);
  });
  for (std::size_t f : floors) out.floored += f;
  return out;
}

ForecastGrid ensemble_mean(const RawForecasts& forecasts) {
  if (forecasts.models.empty()) throw ContractError("ensemble_mean: no forecasts");
  ForecastGrid mean = forecasts.models.front();
  for (std::size_t m = 1; m < forecasts.models.size(); ++m) {
    const ForecastGrid& g = forecasts.models[m];
    for (std::size_t w = 0; w < mean.size(); ++w) {
      for (std::size_t d = 0; d < mean[w].size(); ++d) {
        for (std::size_t v = 0; v < mean[w][d].size(); ++v) mean[w][d][v] += g[w][d][v];
      }
    }
  }
  const double n = static_cast<double>(forecasts.models.size());
  for (auto& window : mean) {
    for (auto& day : window) {
      for (double& v : day) v /= n;
    }
  }
  return mean;
}

BiasFactors compute_bias_factors(std::span<const Forecaster* const> ensemble, std::span<const DailyGraph> graphs,
                                 const ForecastInputs& inputs) {
  return compute_bias_factors(ensemble_raw_forecasts(ensemble, inputs), graphs, inputs);
}

BiasFactors compute_bias_factors(const RawForecasts& forecasts, std::span<const DailyGraph> graphs,
                                 const ForecastInputs& inputs) {
  if (inputs.windows.empty()) throw ContractError("compute_bias_factors: no windows");
  const ForecastGrid mean = ensemble_mean(forecasts);
  BiasFactors b;
  b.ensemble_size = forecasts.models.size();
  b.windows = inputs.windows.size();
  b.days = inputs.days;
  const std::size_t window_days = inputs.seeds.front().days();
  std::array<double, kRegionCount> total{};
  for (std::size_t w = 0; w < inputs.windows.size(); ++w) {
    for (std::size_t d = 0; d < inputs.days; ++d) {
      const DailyGraph& truth = graphs[inputs.windows[w].first + window_days + d];
      for (std::size_t c = 0; c < kRegionCount; ++c) {
        double pred = mean[w][d][c];
        if (pred <= 0.0) {
          pred += kBiasDelta;
          ++b.guarded_terms;
        }
        total[c] += truth.smoothed_cases[c] / pred;
      }
    }
  }
  const double terms = static_cast<double>(b.windows * b.days);
  for (std::size_t c = 0; c < kRegionCount; ++c) b.factor[c] = total[c] / terms;
  return b;
}

void apply_bias(ForecastGrid& raw, const BiasFactors& factors) {
  for (double f : factors.factor) {
    if (!(std::isfinite(f) && f > 0.0)) throw ContractError("apply_bias: factors must be finite and positive");
  }
  for (auto& window : raw) {
    for (auto& day : window) {
      for (std::size_t c = 0; c < day.size(); ++c) day[c] *= factors.factor[c];
    }
  }
}

void apply_bias(RawForecasts& raw, const BiasFactors& factors) {
  for (ForecastGrid& g : raw.models) apply_bias(g, factors);
}

ForecastGrid to_transformed(const ForecastGrid& raw) {
  ForecastGrid out = raw;
  for (auto& window : out) {
    for (auto& day : window) {
      for (double& v : day) v = log10p1(v);
    }
  }
  return out;
}

std::string bias_json(const BiasFactors& factors) {
  nlohmann::json per_region = nlohmann::json::object();
  for (std::size_t c = 0; c < kRegionCount; ++c) per_region[std::string(region_name(region_at(c)))] = factors.factor[c];
  const nlohmann::json j{{"factors", per_region},
                         {"ensemble_size", factors.ensemble_size},
                         {"windows", factors.windows},
                         {"days", factors.days},
                         {"guarded_terms", factors.guarded_terms}};
  return j.dump(2);
}

BiasFactors bias_from_json(const std::string& text) {
  BiasFactors b;
  try {
    const auto j = nlohmann::json::parse(text);
    for (std::size_t c = 0; c < kRegionCount; ++c) {
      b.factor[c] = j.at("factors").at(std::string(region_name(region_at(c)))).get<double>();
    }
    b.ensemble_size = j.at("ensemble_size").get<std::size_t>();
    b.windows = j.at("windows").get<std::size_t>();
    b.days = j.at("days").get<std::size_t>();
    b.guarded_terms = j.at("guarded_terms").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bias factor file: ") + e.what());
  }
  return b;
}

namespace {

template <typename Row>
void for_each_row(const ForecastInputs& inputs, const RawForecasts& raw, const BiasFactors& factors, Row&& row) {
  for (std::size_t m = 0; m < raw.models.size(); ++m) {
    for (std::size_t w = 0; w < inputs.windows.size(); ++w) {
      for (std::size_t d = 0; d < inputs.days; ++d) {
        for (std::size_t c = 0; c < kRegionCount; ++c) {
          const double value = raw.models[m][w][d][c];
          row(inputs.windows[w].start.iso(), m, d + 1, region_at(c), value, value * factors.factor[c]);
        }
      }
    }
  }
}

}  // namespace

void write_forecast_csv(std::ostream& out, const ForecastInputs& inputs, const RawForecasts& raw,
                        const BiasFactors& factors) {
  out << "window_start,model_index,day,region,raw_prediction,corrected_prediction\n";
  out.precision(17);
  for_each_row(inputs, raw, factors,
               [&](const std::string& start, std::size_t m, std::size_t day, Region r, double value, double corrected) {
                 out << start << ',' << m << ',' << day << ',' << region_name(r) << ',' << value << ',' << corrected
                     << '\n';
               });
}

std::string forecast_json(const ForecastInputs& inputs, const RawForecasts& raw, const BiasFactors& factors) {
  nlohmann::json rows = nlohmann::json::array();
  for_each_row(inputs, raw, factors,
               [&](const std::string& start, std::size_t m, std::size_t day, Region r, double value, double corrected) {
                 rows.push_back({{"window_start", start},
                                 {"model_index", m},
                                 {"day", day},
                                 {"region", region_name(r)},
                                 {"raw_prediction", value},
                                 {"corrected_prediction", corrected}});
               });
  return nlohmann::json{{"days", inputs.days}, {"floored", raw.floored}, {"rows", rows}}.dump();
}

}  // namespace aerograph
