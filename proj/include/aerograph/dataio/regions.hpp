#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace aerograph {

// Node order is fixed: the enum value is the node index everywhere.
enum class Region : std::uint8_t {
  kNorthAmerica = 0,
  kSouthAmerica,
  kOceania,
  kAfrica,
  kMiddleEast,
  kEasternEurope,
  kWesternEurope,
  kCentralAsia,
  kSouthAsia,
  kSoutheastAsia,
};

inline constexpr std::size_t kRegionCount = 10;

constexpr std::size_t index_of(Region r) noexcept { return static_cast<std::size_t>(r); }

const std::array<Region, kRegionCount>& all_regions() noexcept;
Region region_at(std::size_t index);

/// Identifier used in CSV files, e.g. "WesternEurope".
std::string_view region_name(Region r) noexcept;
/// Short code used on the command line and in the HTTP API, e.g. "WE".
std::string_view region_code(Region r) noexcept;

/// Accepts either the name or the code (exact match).
std::optional<Region> parse_region(std::string_view text) noexcept;

}  // namespace aerograph
