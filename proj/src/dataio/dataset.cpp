#include "aerograph/dataio/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string_view>

#include "aerograph/errors.hpp"

namespace aerograph {
namespace {

constexpr double kMissing = -1.0;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

std::string where(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

// Blank is missing; anything else must be a number.
double parse_count(std::string_view text, std::size_t line_no) {
  if (text.empty()) return kMissing;
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw DataError(where(line_no) + "not a number: '" + std::string(text) + "'");
  }
  return value;
}

void expect_header(std::istream& in, std::string_view expected, std::string& line) {
  if (!std::getline(in, line)) throw DataError("missing CSV header, expected '" + std::string(expected) + "'");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  if (trim(line) != expected) {
    throw DataError("unexpected CSV header '" + std::string(trim(line)) + "', expected '" + std::string(expected) + "'");
  }
}

Region parse_region_field(std::string_view text, std::size_t line_no) {
  const auto region = parse_region(text);
  if (!region) throw DataError(where(line_no) + "unknown region '" + std::string(text) + "'");
  return *region;
}

}  // namespace

double log10p1(double x) { return std::log10(x + 1.0); }
double pow10m1(double x) { return std::pow(10.0, x) - 1.0; }

CaseTable load_cases(std::istream& in) {
  std::string line;
  expect_header(in, "date,region,cases", line);
  std::map<std::int32_t, std::array<double, kRegionCount>> rows;
  std::set<std::pair<std::int32_t, std::size_t>> seen;
  std::map<std::int32_t, std::array<bool, kRegionCount>> present;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 3) throw DataError(where(line_no) + "expected 3 fields");
    const Date date = Date::parse(fields[0]);
    const Region region = parse_region_field(fields[1], line_no);
    const double value = parse_count(fields[2], line_no);
    if (!seen.emplace(date.days(), index_of(region)).second) {
      throw DataError(where(line_no) + "duplicate row for " + date.iso() + ", " + std::string(region_name(region)));
    }
    rows[date.days()][index_of(region)] = value;
    present[date.days()][index_of(region)] = true;
  }

  CaseTable table;
  if (rows.empty()) return table;
  const Date first = Date::from_days(rows.begin()->first);
  const Date last = Date::from_days(rows.rbegin()->first);
  table.span = DateSpan{first, last};
  const std::size_t n = table.span->length();
  table.cases.assign(n, {});
  table.flagged.assign(n, false);
  for (std::size_t d = 0; d < n; ++d) {
    const std::int32_t key = first.days() + static_cast<std::int32_t>(d);
    auto it = rows.find(key);
    if (it == rows.end()) {
      table.flagged[d] = true;
      continue;
    }
    const auto& has = present[key];
    for (std::size_t r = 0; r < kRegionCount; ++r) {
      const double v = it->second[r];
      table.cases[d][r] = v;
      if (!has[r] || v < 0.0) table.flagged[d] = true;
    }
  }
  return table;
}

CaseTable load_cases(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return load_cases(in);
}

FlightTable load_flights(std::istream& in, std::optional<DateSpan> span) {
  std::string line;
  expect_header(in, "date,src,dst,flights", line);
  struct Row {
    std::int32_t day;
    std::size_t src;
    std::size_t dst;
    double value;
  };
  std::vector<Row> rows;
  std::set<std::tuple<std::int32_t, std::size_t, std::size_t>> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != 4) throw DataError(where(line_no) + "expected 4 fields");
    const Date date = Date::parse(fields[0]);
    const Region src = parse_region_field(fields[1], line_no);
    const Region dst = parse_region_field(fields[2], line_no);
    if (src == dst) {
      throw DataError(where(line_no) + "intra-region edge " + std::string(region_name(src)) + " -> itself");
    }
    const double value = parse_count(fields[3], line_no);
    if (!seen.emplace(date.days(), index_of(src), index_of(dst)).second) {
      throw DataError(where(line_no) + "duplicate row for " + date.iso() + ", " + std::string(region_name(src)) +
                      " -> " + std::string(region_name(dst)));
    }
    rows.push_back({date.days(), index_of(src), index_of(dst), value});
  }

  FlightTable table;
  if (!span && !rows.empty()) {
    auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                        [](const Row& a, const Row& b) { return a.day < b.day; });
    span = DateSpan{Date::from_days(lo->day), Date::from_days(hi->day)};
  }
  if (!span) return table;
  table.span = span;
  const std::size_t n = span->length();
  table.flights.assign(n, Tensor({kRegionCount, kRegionCount}));
  table.flagged.assign(n, false);
  for (const Row& row : rows) {
    if (row.day < span->first.days() || row.day > span->last.days()) continue;
    const auto d = static_cast<std::size_t>(row.day - span->first.days());
    if (row.value < 0.0) {
      table.flagged[d] = true;
      continue;
    }
    table.flights[d].at(row.src, row.dst) = row.value;
  }
  return table;
}

FlightTable load_flights(const std::filesystem::path& path, std::optional<DateSpan> span) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return load_flights(in, span);
}

void write_cases_csv(std::ostream& out, const CaseTable& table) {
  out << "date,region,cases\n";
  if (!table.span) return;
  for (std::size_t d = 0; d < table.cases.size(); ++d) {
    const std::string date = table.span->first.plus(static_cast<std::int32_t>(d)).iso();
    for (std::size_t r = 0; r < kRegionCount; ++r) {
      out << date << ',' << region_name(region_at(r)) << ',';
      const double v = table.cases[d][r];
      if (v == kMissing) {
        out << "-1";
      } else {
        out << static_cast<long long>(std::llround(v));
      }
      out << '\n';
    }
  }
}

void write_flights_csv(std::ostream& out, const FlightTable& table) {
  out << "date,src,dst,flights\n";
  if (!table.span) return;
  for (std::size_t d = 0; d < table.flights.size(); ++d) {
    const std::string date = table.span->first.plus(static_cast<std::int32_t>(d)).iso();
    const Tensor& m = table.flights[d];
    for (std::size_t u = 0; u < kRegionCount; ++u) {
      for (std::size_t v = 0; v < kRegionCount; ++v) {
        if (u == v || m.at(u, v) == 0.0) continue;
        out << date << ',' << region_name(region_at(u)) << ',' << region_name(region_at(v)) << ','
            << static_cast<long long>(std::llround(m.at(u, v))) << '\n';
      }
    }
  }
}

std::vector<DailyGraph> preprocess(const CaseTable& cases, const FlightTable& flights, PreprocessReport* report) {
  if (!cases.span || !flights.span) throw DataError("preprocess: a data source is empty");
  const Date first = std::max(cases.span->first, flights.span->first);
  const Date last = std::min(cases.span->last, flights.span->last);
  if (last < first) throw DataError("preprocess: case and flight date ranges do not overlap");

  PreprocessReport rep;
  rep.aligned_days = static_cast<std::size_t>(last - first + 1);

  // Retained days, in order, as offsets into each table.
  struct Day {
    Date date;
    std::size_t case_idx;
    std::size_t flight_idx;
  };
  std::vector<std::vector<Day>> runs;
  std::vector<Day> current;
  for (Date d = first; d <= last; d = d.plus(1)) {
    const auto ci = static_cast<std::size_t>(d - cases.span->first);
    const auto fi = static_cast<std::size_t>(d - flights.span->first);
    if (cases.flagged[ci] || flights.flagged[fi]) {
      ++rep.deleted_days;
      if (!current.empty()) runs.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.push_back({d, ci, fi});
  }
  if (!current.empty()) runs.push_back(std::move(current));
  rep.runs = runs.size();

  std::vector<DailyGraph> graphs;
  for (const auto& run : runs) {
    rep.longest_run = std::max(rep.longest_run, run.size());
    for (std::size_t i = kSmoothingDays - 1; i < run.size(); ++i) {
      DailyGraph g;
      g.date = run[i].date;
      g.raw_cases.resize(kRegionCount);
      g.smoothed_cases.resize(kRegionCount);
      g.cases.resize(kRegionCount);
      for (std::size_t r = 0; r < kRegionCount; ++r) {
        double total = 0.0;
        for (std::size_t k = i + 1 - kSmoothingDays; k <= i; ++k) total += cases.cases[run[k].case_idx][r];
        g.raw_cases[r] = cases.cases[run[i].case_idx][r];
        g.smoothed_cases[r] = total / static_cast<double>(kSmoothingDays);
        g.cases[r] = log10p1(g.smoothed_cases[r]);
      }
      g.raw_flights = flights.flights[run[i].flight_idx];
      g.flights = g.raw_flights;
      for (std::size_t u = 0; u < kRegionCount; ++u) g.raw_flights.at(u, u) = 0.0;
      for (std::size_t k = 0; k < g.flights.size(); ++k) g.flights[k] = log10p1(g.raw_flights[k]);
      graphs.push_back(std::move(g));
    }
  }
  rep.graphs = graphs.size();
  if (report) *report = rep;

  // A window needs kWindowDays + 1 smoothed days, i.e. kSmoothingDays - 1 more raw days.
  const std::size_t needed = kWindowDays + 1 + kSmoothingDays - 1;
  if (rep.longest_run < needed) {
    throw DataError("preprocess: longest run of retained days is " + std::to_string(rep.longest_run) + ", need " +
                    std::to_string(needed) + " to form a window");
  }
  return graphs;
}

bool consecutive_days(std::span<const DailyGraph> graphs, std::size_t first, std::size_t count) {
  if (count == 0) return true;
  if (first + count > graphs.size()) return false;
  return graphs[first + count - 1].date - graphs[first].date == static_cast<std::int32_t>(count - 1);
}

std::vector<WindowSample> make_windows(std::span<const DailyGraph> graphs, std::size_t window_days) {
  std::vector<WindowSample> windows;
  for (std::size_t i = 0; i + window_days < graphs.size(); ++i) {
    if (consecutive_days(graphs, i, window_days + 1)) windows.push_back({i, graphs[i].date});
  }
  if (windows.empty()) throw DataError("make_windows: no " + std::to_string(window_days + 1) + " consecutive days");
  return windows;
}

DatasetSplit split(std::span<const WindowSample> windows) {
  if (windows.empty()) throw DataError("split: no windows");
  const std::size_t n = windows.size();
  const std::size_t n_test = n * 20 / 100;
  const std::size_t n_val = n * 16 / 100;
  const std::size_t n_train = n - n_test - n_val;
  DatasetSplit out;
  out.train.assign(windows.begin(), windows.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.validation.assign(windows.begin() + static_cast<std::ptrdiff_t>(n_train),
                        windows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  out.test.assign(windows.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), windows.end());
  return out;
}

Dataset build_dataset(const CaseTable& cases, const FlightTable& flights) {
  Dataset ds;
  ds.graphs = preprocess(cases, flights, &ds.report);
  ds.windows = make_windows(ds.graphs);
  ds.split = split(ds.windows);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& cases_csv, const std::filesystem::path& flights_csv) {
  CaseTable cases = load_cases(cases_csv);
  FlightTable flights = load_flights(flights_csv, cases.span);
  return build_dataset(cases, flights);
}

}  // namespace aerograph
