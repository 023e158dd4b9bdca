#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "aerograph/dataio/synthetic.hpp"
#include "aerograph/errors.hpp"
#include "aerograph/forecast/forecast.hpp"
#include "model_fixtures.hpp"

namespace aerograph {
namespace {

using testing::random_model;
using testing::random_sequence;

// Repeats the last input day.
class EchoForecaster : public Forecaster {
 public:
  std::size_t window_days() const override { return kWindowDays; }
  Tensor predict(const SequenceBatch& batch) const override { return batch.features.back(); }
};

// Last day plus a constant offset, so raw predictions stay positive.
class OffsetForecaster : public Forecaster {
 public:
  explicit OffsetForecaster(double offset) : offset_(offset) {}
  std::size_t window_days() const override { return kWindowDays; }
  Tensor predict(const SequenceBatch& batch) const override {
    Tensor out = batch.features.back();
    for (double& v : out.values()) v += offset_;
    return out;
  }

 private:
  double offset_;
};

const Dataset& full_dataset() {
  static const Dataset ds = [] {
    const SyntheticData data = generate_synthetic(SyntheticConfig{});
    return build_dataset(data.cases, data.flights);
  }();
  return ds;
}

std::vector<WindowSample> late_windows(std::size_t days) {
  std::vector<WindowSample> out;
  for (const WindowSample& w : forecastable_windows(full_dataset().graphs, days)) {
    if (w.start >= Date::from_civil(2020, 12, 1)) out.push_back(w);
  }
  return out;
}

ForecastInputs random_inputs(std::size_t windows, std::size_t days, std::mt19937_64& rng) {
  ForecastInputs in;
  in.days = days;
  for (std::size_t w = 0; w < windows; ++w) {
    in.windows.push_back({w, Date::from_civil(2021, 1, 1).plus(static_cast<std::int32_t>(w))});
    in.seeds.push_back(random_sequence(10, kWindowDays, rng));
    in.future.push_back(random_sequence(10, days, rng).adjacency);
  }
  return in;
}

TEST(Recursive, EchoHoldsTheLastSeedDay) {
  std::mt19937_64 rng(1);
  const ForecastInputs in = random_inputs(3, 4, rng);
  const ForecastGrid grid = recursive_predict(EchoForecaster{}, in);
  ASSERT_EQ(grid.size(), 3u);
  for (std::size_t w = 0; w < 3; ++w) {
    ASSERT_EQ(grid[w].size(), 4u);
    for (const auto& day : grid[w]) EXPECT_EQ(day, in.seeds[w].features.back());
  }
}

TEST(Recursive, OneDayEqualsOneStepPrediction) {
  const Dataset& ds = full_dataset();
  const DcsageModel m = DcsageModel::initialize(ModelConfig{}, 17);
  std::vector<WindowSample> windows;
  for (const WindowSample& w : ds.split.test) {
    if (consecutive_days(ds.graphs, w.first, kWindowDays + 1)) windows.push_back(w);
  }
  const ForecastInputs in = forecast_inputs(ds.graphs, windows, 1);
  const ForecastGrid grid = recursive_predict(m, in);
  const Tensor direct = m.predict(make_batch(ds.graphs, windows));
  for (std::size_t w = 0; w < windows.size(); ++w) {
    for (std::size_t v = 0; v < 10; ++v) EXPECT_EQ(grid[w][0][v], direct[w * 10 + v]);
  }
}

TEST(Recursive, MatchesManualUnrolling) {
  std::mt19937_64 rng(2);
  ModelConfig cfg;
  cfg.hidden_dim = 5;
  const DcsageModel m = random_model(cfg, 8);
  const ForecastInputs in = random_inputs(2, 3, rng);
  const ForecastGrid grid = recursive_predict(m, in);
  for (std::size_t w = 0; w < 2; ++w) {
    GraphSequence buf = in.seeds[w];
    for (std::size_t k = 0; k < 3; ++k) {
      const std::vector<GraphSequence> one{buf};
      const Tensor p = m.predict(stack_sequences(one));
      std::vector<double> next(p.values().begin(), p.values().end());
      EXPECT_EQ(grid[w][k], next) << "window " << w << " step " << k;
      buf.features.erase(buf.features.begin());
      buf.adjacency.erase(buf.adjacency.begin());
      buf.features.push_back(next);
      buf.adjacency.push_back(in.future[w][k]);
    }
  }
}

TEST(Recursive, FutureAdjacencyIsUsed) {
  std::mt19937_64 rng(3);
  const DcsageModel m = random_model(ModelConfig{}, 4);
  ForecastInputs in = random_inputs(1, 3, rng);
  const ForecastGrid before = recursive_predict(m, in);
  in.future[0][0] = Tensor({10, 10});
  const ForecastGrid after = recursive_predict(m, in);
  EXPECT_EQ(before[0][0], after[0][0]);
  EXPECT_NE(before[0][1], after[0][1]);
}

TEST(Recursive, MissingAdjacencyIsContractError) {
  std::mt19937_64 rng(4);
  ForecastInputs in = random_inputs(2, 3, rng);
  in.future[1].pop_back();
  EXPECT_THROW(recursive_predict(EchoForecaster{}, in), ContractError);
  in.future.pop_back();
  EXPECT_THROW(recursive_predict(EchoForecaster{}, in), ContractError);
  in = random_inputs(1, 3, rng);
  in.days = 0;
  EXPECT_THROW(recursive_predict(EchoForecaster{}, in), ContractError);
}

TEST(Inputs, WindowsNeedConsecutiveForecastDays) {
  const Dataset& ds = full_dataset();
  const auto windows = forecastable_windows(ds.graphs, 30);
  ASSERT_FALSE(windows.empty());
  for (const WindowSample& w : windows) EXPECT_TRUE(consecutive_days(ds.graphs, w.first, kWindowDays + 30));
  EXPECT_LT(windows.size(), ds.windows.size());
  const std::vector<WindowSample> last{ds.windows.back()};
  EXPECT_THROW(forecast_inputs(ds.graphs, last, 30), ContractError);
}

TEST(Inputs, SeedAndFutureComeFromTheRightDays) {
  const Dataset& ds = full_dataset();
  const auto windows = late_windows(5);
  const std::vector<WindowSample> one{windows.front()};
  const ForecastInputs in = forecast_inputs(ds.graphs, one, 5);
  const std::size_t f = one[0].first;
  EXPECT_EQ(in.seeds[0].features.front(), ds.graphs[f].cases);
  EXPECT_EQ(in.seeds[0].features.back(), ds.graphs[f + 6].cases);
  ASSERT_EQ(in.future[0].size(), 5u);
  EXPECT_EQ(in.future[0][0].data(), ds.graphs[f + 7].flights.data());
  EXPECT_EQ(in.future[0][4].data(), ds.graphs[f + 11].flights.data());
}

TEST(Raw, InverseTransformAndFloor) {
  std::size_t floors = 0;
  EXPECT_NEAR(to_raw(2.0, &floors), 99.0, 1e-12);
  EXPECT_EQ(to_raw(0.0, &floors), 0.0);
  EXPECT_EQ(floors, 0u);
  EXPECT_EQ(to_raw(-0.5, &floors), 0.0);
  EXPECT_EQ(floors, 1u);
  for (double x : {0.0, 0.3, 1.7, 4.2}) EXPECT_NEAR(log10p1(to_raw(x)), x, 1e-12);
}

// Two windows whose truth-to-prediction ratios are 0.5 and 1.5.
TEST(Bias, AveragesRatiosOverWindows) {
  std::vector<DailyGraph> graphs(kWindowDays + 2);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    graphs[i].date = Date::from_civil(2021, 1, 1).plus(static_cast<std::int32_t>(i));
    graphs[i].smoothed_cases.assign(kRegionCount, 0.0);
  }
  graphs[7].smoothed_cases.assign(kRegionCount, 1.0);
  graphs[8].smoothed_cases.assign(kRegionCount, 3.0);
  ForecastInputs in;
  in.days = 1;
  for (std::size_t w = 0; w < 2; ++w) {
    in.windows.push_back({w, graphs[w].date});
    GraphSequence s;
    s.features.assign(kWindowDays, std::vector<double>(kRegionCount, 0.0));
    in.seeds.push_back(s);
  }
  RawForecasts raw;
  raw.models.assign(2, ForecastGrid(2, {std::vector<double>(kRegionCount, 2.0)}));
  const BiasFactors b = compute_bias_factors(raw, graphs, in);
  for (double f : b.factor) EXPECT_DOUBLE_EQ(f, 1.0);
  EXPECT_EQ(b.guarded_terms, 0u);
  EXPECT_EQ(b.ensemble_size, 2u);
  EXPECT_EQ(b.windows, 2u);

  // A zero ensemble mean in one region uses the delta guard.
  for (auto& model : raw.models) model[0][0][4] = 0.0;
  const BiasFactors g = compute_bias_factors(raw, graphs, in);
  EXPECT_EQ(g.guarded_terms, 1u);
  EXPECT_NEAR(g.factor[4], (1.0 / kBiasDelta + 1.5) / 2.0, 1.0);
  EXPECT_DOUBLE_EQ(g.factor[3], 1.0);
}

TEST(Bias, FactorsUseTheEnsembleMean) {
  std::vector<DailyGraph> graphs(kWindowDays + 1);
  for (std::size_t i = 0; i < graphs.size(); ++i) {
    graphs[i].date = Date::from_civil(2021, 1, 1).plus(static_cast<std::int32_t>(i));
    graphs[i].smoothed_cases.assign(kRegionCount, 6.0);
  }
  ForecastInputs in;
  in.days = 1;
  in.windows.push_back({0, graphs[0].date});
  GraphSequence s;
  s.features.assign(kWindowDays, std::vector<double>(kRegionCount, 0.0));
  in.seeds.push_back(s);
  RawForecasts raw;
  raw.models.push_back(ForecastGrid(1, {std::vector<double>(kRegionCount, 1.0)}));
  raw.models.push_back(ForecastGrid(1, {std::vector<double>(kRegionCount, 3.0)}));
  // Mean prediction 2, not the mean of per-model ratios (4).
  for (double f : compute_bias_factors(raw, graphs, in).factor) EXPECT_DOUBLE_EQ(f, 3.0);
}

TEST(Bias, CorrectedForecastsClose) {
  const Dataset& ds = full_dataset();
  const ForecastInputs in = forecast_inputs(ds.graphs, late_windows(10), 10);
  const OffsetForecaster a(0.05), b(-0.1), c(0.2);
  const std::vector<const Forecaster*> ensemble{&a, &b, &c};
  RawForecasts raw = ensemble_raw_forecasts(ensemble, in);
  const BiasFactors factors = compute_bias_factors(raw, ds.graphs, in);
  ASSERT_EQ(factors.guarded_terms, 0u);
  for (double f : factors.factor) EXPECT_GT(f, 0.0);
  apply_bias(raw, factors);
  const BiasFactors closed = compute_bias_factors(raw, ds.graphs, in);
  for (double f : closed.factor) EXPECT_NEAR(f, 1.0, 1e-9);
}

TEST(Bias, RegionsAreIndependent) {
  const Dataset& ds = full_dataset();
  const ForecastInputs in = forecast_inputs(ds.graphs, late_windows(5), 5);
  const OffsetForecaster a(0.1);
  const std::vector<const Forecaster*> ensemble{&a};
  RawForecasts raw = ensemble_raw_forecasts(ensemble, in);
  const BiasFactors before = compute_bias_factors(raw, ds.graphs, in);
  for (auto& window : raw.models[0]) {
    for (auto& day : window) day[6] *= 2.0;
  }
  const BiasFactors after = compute_bias_factors(raw, ds.graphs, in);
  for (std::size_t r = 0; r < kRegionCount; ++r) {
    if (r == 6) {
      EXPECT_NEAR(after.factor[r], before.factor[r] / 2.0, 1e-12 * before.factor[r]);
    } else {
      EXPECT_EQ(after.factor[r], before.factor[r]);
    }
  }
}

TEST(Bias, ApplyRejectsNonPositiveFactors) {
  BiasFactors b;
  b.factor.fill(1.0);
  b.factor[2] = 0.0;
  ForecastGrid g(1, {std::vector<double>(kRegionCount, 1.0)});
  EXPECT_THROW(apply_bias(g, b), ContractError);
}

TEST(Bias, JsonRoundTrip) {
  BiasFactors b;
  for (std::size_t c = 0; c < kRegionCount; ++c) b.factor[c] = 0.1 * static_cast<double>(c) + 1.0 / 3.0;
  b.ensemble_size = 7;
  b.windows = 12;
  b.days = 30;
  b.guarded_terms = 2;
  const BiasFactors r = bias_from_json(bias_json(b));
  EXPECT_EQ(r.factor, b.factor);
  EXPECT_EQ(r.ensemble_size, 7u);
  EXPECT_EQ(r.guarded_terms, 2u);
  EXPECT_THROW(bias_from_json("{\"factors\": {}}"), DataError);
}

TEST(Export, CsvHasOneRowPerModelWindowDayRegion) {
  const Dataset& ds = full_dataset();
  auto windows = late_windows(3);
  windows.resize(2);
  const ForecastInputs in = forecast_inputs(ds.graphs, windows, 3);
  const EchoForecaster a;
  const OffsetForecaster b(0.1);
  const std::vector<const Forecaster*> ensemble{&a, &b};
  const RawForecasts raw = ensemble_raw_forecasts(ensemble, in);
  BiasFactors f;
  f.factor.fill(2.0);
  std::ostringstream out;
  write_forecast_csv(out, in, raw, f);
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "window_start,model_index,day,region,raw_prediction,corrected_prediction");
  std::size_t rows = 0;
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 2u * 2u * 3u * kRegionCount);
  EXPECT_NE(forecast_json(in, raw, f).find("\"corrected_prediction\""), std::string::npos);
}

}  // namespace
}  // namespace aerograph
