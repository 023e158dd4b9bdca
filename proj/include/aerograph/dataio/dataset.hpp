#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerograph/dataio/date.hpp"
#include "aerograph/dataio/regions.hpp"
#include "aerograph/numerics/tensor.hpp"

namespace aerograph {

/// log10(x + 1) and its inverse; the transform applied to cases and flights.
double log10p1(double x);
double pow10m1(double x);

struct DateSpan {
  Date first;
  Date last;  // inclusive
  std::size_t length() const { return static_cast<std::size_t>(last - first + 1); }
};

/// Raw daily case counts per region, indexed by day offset from span.first.
/// A day is flagged when any region's value is missing (-1, blank, absent
/// row) or erroneous (other negative values); flagged days are deleted
/// during preprocessing.
struct CaseTable {
  std::optional<DateSpan> span;
  std::vector<std::array<double, kRegionCount>> cases;
  std::vector<bool> flagged;
};

/// Raw daily flight matrices, entry (u, v) = flights from u to v.
struct FlightTable {
  std::optional<DateSpan> span;
  std::vector<Tensor> flights;
  std::vector<bool> flagged;
};

CaseTable load_cases(std::istream& in);
CaseTable load_cases(const std::filesystem::path& path);

/// Without `span` the table covers the dates present in the file. With it,
/// the table covers exactly that span (absent pairs and days are zero) and
/// rows outside it are ignored.
FlightTable load_flights(std::istream& in, std::optional<DateSpan> span = std::nullopt);
FlightTable load_flights(const std::filesystem::path& path, std::optional<DateSpan> span = std::nullopt);

void write_cases_csv(std::ostream& out, const CaseTable& table);
void write_flights_csv(std::ostream& out, const FlightTable& table);

/// One preprocessed day.
struct DailyGraph {
  Date date;
  std::vector<double> cases;           // log10p1(smoothed_cases)
  Tensor flights;                      // log10p1(raw_flights), n x n
  std::vector<double> smoothed_cases;  // trailing 7-day mean of raw_cases
  std::vector<double> raw_cases;
  Tensor raw_flights;

  std::size_t nodes() const { return cases.size(); }
};

struct PreprocessReport {
  std::size_t aligned_days = 0;
  std::size_t deleted_days = 0;
  std::size_t runs = 0;
  std::size_t longest_run = 0;
  std::size_t graphs = 0;
};

inline constexpr std::size_t kSmoothingDays = 7;
inline constexpr std::size_t kWindowDays = 7;

/// Aligns both sources, deletes flagged days, smooths cases with a trailing
/// 7-day mean restarted at every gap (the first 6 days of each run are
/// dropped) and log-transforms cases and flights.
///
/// Throws DataError when no run is long enough to form a single window.
std::vector<DailyGraph> preprocess(const CaseTable& cases, const FlightTable& flights,
                                   PreprocessReport* report = nullptr);

/// Seven input days starting at graphs[first]; the target is graphs[first + 7].
struct WindowSample {
  std::size_t first = 0;
  Date start;
};

struct DatasetSplit {
  std::vector<WindowSample> train;
  std::vector<WindowSample> validation;
  std::vector<WindowSample> test;
};

/// True when graphs[first .. first + count) are consecutive calendar days.
bool consecutive_days(std::span<const DailyGraph> graphs, std::size_t first, std::size_t count);

/// One window per position with 8 consecutive retained days.
std::vector<WindowSample> make_windows(std::span<const DailyGraph> graphs, std::size_t window_days = kWindowDays);

/// Chronological 64/16/20 split; validation and test sizes round down.
DatasetSplit split(std::span<const WindowSample> windows);

struct Dataset {
  std::vector<DailyGraph> graphs;
  std::vector<WindowSample> windows;
  DatasetSplit split;
  PreprocessReport report;
};

Dataset load_dataset(const std::filesystem::path& cases_csv, const std::filesystem::path& flights_csv);
Dataset build_dataset(const CaseTable& cases, const FlightTable& flights);

}  // namespace aerograph
