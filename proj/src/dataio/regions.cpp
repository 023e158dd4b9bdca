#include "aerograph/dataio/regions.hpp"

#include <string>

#include "aerograph/errors.hpp"

namespace aerograph {
namespace {

struct RegionInfo {
  std::string_view name;
  std::string_view code;
};

constexpr std::array<RegionInfo, kRegionCount> kInfo{{
    {"NorthAmerica", "NA"},
    {"SouthAmerica", "SAM"},
    {"Oceania", "OC"},
    {"Africa", "AF"},
    {"MiddleEast", "ME"},
    {"EasternEurope", "EE"},
    {"WesternEurope", "WE"},
    {"CentralAsia", "CAS"},
    {"SouthAsia", "SAS"},
    {"SoutheastAsia", "SEA"},
}};

}  // namespace

const std::array<Region, kRegionCount>& all_regions() noexcept {
  static const std::array<Region, kRegionCount> kAll = [] {
    std::array<Region, kRegionCount> out{};
    for (std::size_t i = 0; i < kRegionCount; ++i) out[i] = static_cast<Region>(i);
    return out;
  }();
  return kAll;
}

Region region_at(std::size_t index) {
  if (index >= kRegionCount) throw ContractError("region index " + std::to_string(index) + " out of range");
  return static_cast<Region>(index);
}

std::string_view region_name(Region r) noexcept { return kInfo[index_of(r)].name; }

std::string_view region_code(Region r) noexcept { return kInfo[index_of(r)].code; }

std::optional<Region> parse_region(std::string_view text) noexcept {
  for (std::size_t i = 0; i < kRegionCount; ++i) {
    if (kInfo[i].name == text || kInfo[i].code == text) return static_cast<Region>(i);
  }
  return std::nullopt;
}

}  // namespace aerograph
