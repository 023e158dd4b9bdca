#pragma once

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "aerograph/dataio/dataset.hpp"
#include "aerograph/model/checkpoint.hpp"
#include "aerograph/model/dcsage.hpp"

namespace aerograph {

inline constexpr std::size_t kDefaultHorizon = 30;

/// Non-owning view of an ensemble as plain forecasters.
std::vector<const Forecaster*> members(std::span<const ModelCheckpoint> ensemble);

/// Seed windows and the adjacency each forecast day is paired with.
///
/// future[w][k] is the adjacency of the day predicted at step k + 1, i.e. the
/// graph date start + window_days + k. It is used when that prediction is
/// fed back as input; the final step's matrix is carried but not consumed.
struct ForecastInputs {
  std::vector<WindowSample> windows;
  std::vector<GraphSequence> seeds;
  std::vector<std::vector<Tensor>> future;
  std::size_t days = 0;
};

/// Transformed adjacency to use for a day; the default is graph.flights.
using AdjacencyFn = std::function<Tensor(const DailyGraph&)>;

/// Windows whose seed days and all `days` forecast days are consecutive
/// retained days, so both future adjacency and ground truth exist.
std::vector<WindowSample> forecastable_windows(std::span<const DailyGraph> graphs, std::size_t days,
                                               std::size_t window_days = kWindowDays);

ForecastInputs forecast_inputs(std::span<const DailyGraph> graphs, std::span<const WindowSample> windows,
                               std::size_t days, const AdjacencyFn& adjacency = {},
                               std::size_t window_days = kWindowDays);

/// [window][day][node], transformed domain.
using ForecastGrid = std::vector<std::vector<std::vector<double>>>;

/// Rolling-buffer recursion, batched over all windows: each step predicts
/// the next day, drops the oldest buffered day and appends the prediction
/// (paired with that day's supplied adjacency). Throws ContractError when a
/// window lacks adjacency for some day or days == 0.
ForecastGrid recursive_predict(const Forecaster& model, const ForecastInputs& inputs);

/// max(0, 10^x - 1). Increments *floors when the floor applies.
double to_raw(double transformed, std::size_t* floors = nullptr);

/// Per-model forecasts converted to the raw-case domain.
struct RawForecasts {
  std::vector<ForecastGrid> models;  // [model][window][day][node]
  std::size_t floored = 0;           // predictions clamped at zero
};

RawForecasts ensemble_raw_forecasts(std::span<const Forecaster* const> ensemble, const ForecastInputs& inputs);

/// [window][day][node] mean over models.
ForecastGrid ensemble_mean(const RawForecasts& forecasts);

struct BiasFactors {
  std::array<double, kRegionCount> factor{};
  std::size_t ensemble_size = 0;
  std::size_t windows = 0;
  std::size_t days = 0;
  /// Ratio terms whose ensemble-mean prediction was <= 0 and used the
  /// delta guard instead.
  std::size_t guarded_terms = 0;
};

inline constexpr double kBiasDelta = 1e-9;

/// b_c = mean over windows and days of y / y~, where y~ is the raw-domain
/// ensemble-mean prediction and y the smoothed raw cases on that day.
BiasFactors compute_bias_factors(std::span<const Forecaster* const> ensemble, std::span<const DailyGraph> graphs,
                                 const ForecastInputs& inputs);
/// Same, from forecasts already computed on `inputs`.
BiasFactors compute_bias_factors(const RawForecasts& forecasts, std::span<const DailyGraph> graphs,
                                 const ForecastInputs& inputs);

/// Multiplies each region's raw predictions by its factor, in place.
void apply_bias(ForecastGrid& raw, const BiasFactors& factors);
void apply_bias(RawForecasts& raw, const BiasFactors& factors);

/// log10(x + 1) of every entry; the transformed view of a raw grid.
ForecastGrid to_transformed(const ForecastGrid& raw);

std::string bias_json(const BiasFactors& factors);
BiasFactors bias_from_json(const std::string& text);

/// CSV rows (window_start, model_index, day, region, raw_prediction,
/// corrected_prediction); `days` are 1-based.
void write_forecast_csv(std::ostream& out, const ForecastInputs& inputs, const RawForecasts& raw,
                        const BiasFactors& factors);
std::string forecast_json(const ForecastInputs& inputs, const RawForecasts& raw, const BiasFactors& factors);

}  // namespace aerograph
