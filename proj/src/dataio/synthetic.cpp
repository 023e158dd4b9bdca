#include "aerograph/dataio/synthetic.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "aerograph/errors.hpp"
#include "aerograph/numerics/init.hpp"

namespace aerograph {
namespace {

// Rough populations (people) and relative air connectivity per region.
constexpr std::array<double, kRegionCount> kPopulation{370e6, 430e6, 42e6,  1.3e9, 420e6,
                                                        290e6, 420e6, 75e6,  1.9e9, 680e6};
constexpr std::array<double, kRegionCount> kConnectivity{10.0, 3.0, 2.0, 1.5, 6.0, 4.0, 12.0, 0.8, 2.5, 4.0};
constexpr double kTotalDailyFlights = 30000.0;
constexpr double kPassengersPerFlight = 150.0;
constexpr double kRecoveryRate = 1.0 / 7.0;
constexpr double kWaningRate = 1.0 / 180.0;
constexpr double kAscertainment = 0.25;

std::array<double, kRegionCount> connectivity(const SyntheticConfig& config) {
  auto w = kConnectivity;
  if (!config.hub) return w;
  if (!(config.hub_share > 0.0 && config.hub_share < 1.0)) throw ContractError("hub_share must lie in (0, 1)");
  // Hub-incident share = 2 w_h S / (2 w_h S + P) with S, P the sum and the
  // ordered-pair mass of the other regions; solve for w_h.
  const std::size_t h = index_of(*config.hub);
  double s = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < kRegionCount; ++i) {
    if (i == h) continue;
    s += w[i];
    sq += w[i] * w[i];
  }
  const double pairs = s * s - sq;
  w[h] = config.hub_share * pairs / (2.0 * s * (1.0 - config.hub_share));
  return w;
}

// Fraction of normal air traffic: a lockdown dip followed by slow recovery.
double mobility(std::size_t day) {
  const double t = static_cast<double>(day);
  if (t < 20.0) return 1.0;
  if (t < 60.0) return 1.0 - 0.7 * (t - 20.0) / 40.0;
  return std::min(0.85, 0.3 + 0.55 * (t - 60.0) / 160.0);
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticConfig& config) {
  if (config.days < 60) throw ContractError("synthetic dataset needs at least 60 days");
  Rng rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  const auto w = connectivity(config);
  double pair_mass = 0.0;
  for (std::size_t u = 0; u < kRegionCount; ++u) {
    for (std::size_t v = 0; v < kRegionCount; ++v) {
      if (u != v) pair_mass += w[u] * w[v];
    }
  }
  const double flight_scale = kTotalDailyFlights / pair_mass;

  std::array<double, kRegionCount> r0{};
  std::array<double, kRegionCount> offset{};
  for (std::size_t i = 0; i < kRegionCount; ++i) {
    r0[i] = 1.25 + 0.1 * noise(rng);
    offset[i] = phase(rng);
  }

  std::array<double, kRegionCount> susceptible = kPopulation;
  std::array<double, kRegionCount> infectious{};
  std::array<double, kRegionCount> recovered{};
  infectious[index_of(Region::kSoutheastAsia)] = 200.0;
  susceptible[index_of(Region::kSoutheastAsia)] -= 200.0;

  SyntheticData data;
  const DateSpan span{config.start, config.start.plus(static_cast<std::int32_t>(config.days - 1))};
  data.cases.span = span;
  data.flights.span = span;
  data.cases.cases.assign(config.days, {});
  data.cases.flagged.assign(config.days, false);
  data.flights.flights.assign(config.days, Tensor({kRegionCount, kRegionCount}));
  data.flights.flagged.assign(config.days, false);

  // The burn-in lets the outbreak spread along the flight network before the
  // first recorded day, so every region starts with an established epidemic.
  Tensor burn_in_flights({kRegionCount, kRegionCount});
  const std::size_t steps = config.burn_in_days + config.days;
  for (std::size_t step = 0; step < steps; ++step) {
    const bool recorded = step >= config.burn_in_days;
    const std::size_t day = recorded ? step - config.burn_in_days : 0;
    const double weekday = 1.0 + 0.08 * std::sin(2.0 * std::numbers::pi * static_cast<double>(step % 7) / 7.0);
    const double travel = recorded ? mobility(day) : 1.0;
    Tensor& f = recorded ? data.flights.flights[day] : burn_in_flights;
    for (std::size_t u = 0; u < kRegionCount; ++u) {
      for (std::size_t v = 0; v < kRegionCount; ++v) {
        if (u == v) continue;
        const double mean = flight_scale * w[u] * w[v] * travel * weekday * std::exp(0.05 * noise(rng));
        f.at(u, v) = static_cast<double>(std::poisson_distribution<long long>(mean)(rng));
      }
    }

    // Transmission, with imported infectious travellers.
    std::array<double, kRegionCount> fresh{};
    for (std::size_t v = 0; v < kRegionCount; ++v) {
      double imported = 0.0;
      for (std::size_t u = 0; u < kRegionCount; ++u) {
        if (u != v) imported += f.at(u, v) * kPassengersPerFlight * infectious[u] / kPopulation[u];
      }
      const double seasonal = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * static_cast<double>(step) / 150.0 + offset[v]);
      const double beta = kRecoveryRate * r0[v] * seasonal;
      const double force = beta * (infectious[v] + config.travel_mixing * imported) * susceptible[v] / kPopulation[v];
      const double draw =
          force > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(force)(rng)) : 0.0;
      fresh[v] = std::min(draw, susceptible[v]);
    }
    for (std::size_t v = 0; v < kRegionCount; ++v) {
      const double recovering = infectious[v] * kRecoveryRate;
      const double waning = recovered[v] * kWaningRate;
      susceptible[v] += waning - fresh[v];
      infectious[v] += fresh[v] - recovering;
      recovered[v] += recovering - waning;
      const double reported =
          fresh[v] > 0.0 ? static_cast<double>(std::poisson_distribution<long long>(kAscertainment * fresh[v])(rng)) : 0.0;
      if (recorded) data.cases.cases[day][v] = reported;
    }
  }

  // Missing reports, evenly spaced through the middle of the span.
  for (std::size_t k = 0; k < config.missing_days; ++k) {
    const std::size_t day = config.days * (k + 1) / (config.missing_days + 1);
    const std::size_t region = (k * 3) % kRegionCount;
    data.cases.cases[day][region] = -1.0;
    data.cases.flagged[day] = true;
  }
  return data;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream cases(dir / "cases.csv");
  std::ofstream flights(dir / "flights.csv");
  if (!cases || !flights) throw DataError("cannot write synthetic dataset into " + dir.string());
  write_cases_csv(cases, data.cases);
  write_flights_csv(flights, data.flights);
}

std::array<double, kRegionCount> mean_outgoing_flights(const FlightTable& flights) {
  std::array<double, kRegionCount> out{};
  if (flights.flights.empty()) return out;
  for (const Tensor& m : flights.flights) {
    for (std::size_t u = 0; u < kRegionCount; ++u) {
      for (std::size_t v = 0; v < kRegionCount; ++v) {
        if (u != v) out[u] += m.at(u, v);
      }
    }
  }
  for (double& v : out) v /= static_cast<double>(flights.flights.size());
  return out;
}

}  // namespace aerograph
