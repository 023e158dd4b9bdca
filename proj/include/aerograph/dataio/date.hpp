#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace aerograph {

/// Calendar day, stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
 public:
  constexpr Date() = default;
  static constexpr Date from_days(std::int32_t days) { return Date(days); }
  static Date from_civil(int year, unsigned month, unsigned day);
  /// Parses YYYY-MM-DD; throws DataError on anything else.
  static Date parse(std::string_view iso);

  constexpr std::int32_t days() const noexcept { return days_; }
  std::string iso() const;
  constexpr Date plus(std::int32_t n) const noexcept { return Date(days_ + n); }

  friend constexpr auto operator<=>(Date, Date) = default;
  friend constexpr std::int32_t operator-(Date a, Date b) noexcept { return a.days_ - b.days_; }

 private:
  constexpr explicit Date(std::int32_t days) : days_(days) {}
  std::int32_t days_ = 0;
};

}  // namespace aerograph
