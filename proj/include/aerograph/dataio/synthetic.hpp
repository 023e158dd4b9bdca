#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "aerograph/dataio/dataset.hpp"

namespace aerograph {

/// Stochastic metapopulation SIRS epidemic over the 10 regions, coupled
/// through a daily flight network. Infectious travellers arriving on
/// flights seed transmission at the destination, so case dynamics depend on
/// the flight matrices the model sees.
struct SyntheticConfig {
  std::uint64_t seed = 20200301;
  std::size_t days = 460;
  /// Weight of an arriving infectious traveller relative to a resident
  /// case in the destination's force of infection.
  double travel_mixing = 1000.0;
  /// Simulated but unrecorded days before `start`.
  std::size_t burn_in_days = 300;
  Date start = Date::from_civil(2020, 3, 1);
  /// When set, the hub's incident edges carry `hub_share` of all flights.
  std::optional<Region> hub;
  double hub_share = 0.9;
  /// Days with a missing case report (written as -1), spread over the span.
  std::size_t missing_days = 2;
};

struct SyntheticData {
  CaseTable cases;
  FlightTable flights;
};

SyntheticData generate_synthetic(const SyntheticConfig& config);

/// Writes cases.csv and flights.csv into `dir` (created if needed).
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

/// Mean daily outgoing flights per region over a table.
std::array<double, kRegionCount> mean_outgoing_flights(const FlightTable& flights);

}  // namespace aerograph
