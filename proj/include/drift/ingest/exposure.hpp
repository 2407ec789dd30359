#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "drift/common.hpp"
#include "drift/ingest/csv.hpp"

namespace drift::ingest {

/// Pre-aggregated keyword counts for one outlet on one day.
struct TranscriptDay {
  Date date;
  long long hits = 0;
  long long words = 0;
  long long shows = 0;
  long long shows_with_hits = 0;
};

/// A daily attention measure. `raw` and `z` are parallel to `dates`; `z`
/// stays empty until the series is standardized.
struct ExposureSeries {
  std::string name;
  std::vector<Date> dates;
  Series raw;
  Series z;
  Date coverage_start;
  Date coverage_end;
  std::vector<std::string> warnings;
};

/// Reads `date,hits,words,shows,shows_with_hits` rows.
inline std::vector<TranscriptDay> load_transcripts(const std::filesystem::path& path) {
  const auto table = read_csv(path);
  std::vector<TranscriptDay> days;
  days.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto where = path.string() + ":" + std::to_string(row.line);
    if (row.fields.size() != 5) throw Error(where + ": expected 5 fields (date,hits,words,shows,shows_with_hits)");
    TranscriptDay d;
    try {
      d.date = parse_date(row.fields[0]);
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    d.hits = parse_int(row.fields[1], path, row.line);
    d.words = parse_int(row.fields[2], path, row.line);
    d.shows = parse_int(row.fields[3], path, row.line);
    d.shows_with_hits = parse_int(row.fields[4], path, row.line);
    if (d.shows < 0 || d.shows_with_hits < 0) throw Error(where + ": negative show count");
    if (d.shows_with_hits > d.shows) throw Error(where + ": shows_with_hits exceeds shows");
    days.push_back(d);
  }
  std::sort(days.begin(), days.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
  for (std::size_t i = 1; i < days.size(); ++i) {
    if (days[i].date == days[i - 1].date) {
      throw Error(path.string() + ": duplicate date " + format_date(days[i].date));
    }
  }
  return days;
}

namespace detail {

inline ExposureSeries from_days(std::string name, const std::vector<TranscriptDay>& days) {
  ExposureSeries s;
  s.name = std::move(name);
  if (!days.empty()) {
    s.coverage_start = days.front().date;
    s.coverage_end = days.back().date;
  }
  s.dates.reserve(days.size());
  for (const auto& d : days) s.dates.push_back(d.date);
  return s;
}

inline void check_counts(const TranscriptDay& d) {
  if (d.hits < 0 || d.words < 0) throw Error("negative hits or words on " + format_date(d.date));
  if (d.words == 0 && d.hits != 0) throw Error("hits without words on " + format_date(d.date));
}

}  // namespace detail

/// Keyword density per 1,000 transcript words. Days with no words get a
/// density of zero and a warning so the daily index stays contiguous.
inline ExposureSeries transcript_density(const std::vector<TranscriptDay>& days, std::string name = "density") {
  auto s = detail::from_days(std::move(name), days);
  s.raw.reserve(days.size());
  for (const auto& d : days) {
    detail::check_counts(d);
    if (d.words == 0) {
      s.warnings.push_back(s.name + ": no transcript words on " + format_date(d.date) + "; density set to 0");
      s.raw.push_back(0.0);
    } else {
      s.raw.push_back(1000.0 * static_cast<double>(d.hits) / static_cast<double>(d.words));
    }
  }
  return s;
}

/// Raw daily keyword hit counts.
inline ExposureSeries transcript_mentions(const std::vector<TranscriptDay>& days, std::string name = "mentions") {
  auto s = detail::from_days(std::move(name), days);
  s.raw.reserve(days.size());
  for (const auto& d : days) {
    detail::check_counts(d);
    s.raw.push_back(static_cast<double>(d.hits));
  }
  return s;
}

/// Standardizes to mean 0 and sample standard deviation 1 over the
/// non-missing entries; missing entries stay missing.
inline Series zscore_full_sample(std::span<const double> xs) {
  const auto m = sample_moments(xs);
  if (m.count < 2) throw Error("degenerate series: fewer than 2 non-missing values");
  double scale = 0.0;
  for (double x : xs) {
    if (!is_missing(x)) scale = std::max(scale, std::abs(x));
  }
  if (!(m.sd > 1e-13 * scale) || scale == 0.0) throw Error("degenerate series: zero variance");
  Series out(xs.size(), kMissing);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!is_missing(xs[i])) out[i] = (xs[i] - m.mean) / m.sd;
  }
  return out;
}

/// Reads `date,value` rows of an externally sourced attention index.
inline ExposureSeries load_external_series(const std::filesystem::path& path, std::string name) {
  const auto table = read_csv(path);
  std::vector<std::pair<Date, double>> rows;
  rows.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto where = path.string() + ":" + std::to_string(row.line);
    if (row.fields.size() != 2) throw Error(where + ": expected 2 fields (date,value)");
    Date d;
    try {
      d = parse_date(row.fields[0]);
    } catch (const Error& e) {
      throw Error(where + ": " + e.what());
    }
    rows.emplace_back(d, parse_double(row.fields[1], path, row.line));
  }
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].first == rows[i - 1].first) {
      throw Error(path.string() + ": duplicate date " + format_date(rows[i].first));
    }
  }
  ExposureSeries s;
  s.name = std::move(name);
  for (const auto& [d, v] : rows) {
    s.dates.push_back(d);
    s.raw.push_back(v);
  }
  if (!rows.empty()) {
    s.coverage_start = rows.front().first;
    s.coverage_end = rows.back().first;
  }
  return s;
}

/// Day-wise mean of several raw series; a day is missing unless every
/// component covers it.
inline ExposureSeries mean_of(const std::vector<ExposureSeries>& parts, std::string name) {
  if (parts.empty()) throw Error("mean exposure '" + name + "' has no components");
  std::map<Date, std::pair<double, std::size_t>> acc;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < p.dates.size(); ++i) {
      if (is_missing(p.raw[i])) continue;
      auto& slot = acc[p.dates[i]];
      slot.first += p.raw[i];
      slot.second += 1;
    }
  }
  ExposureSeries s;
  s.name = std::move(name);
  for (const auto& [d, v] : acc) {
    if (v.second != parts.size()) continue;
    s.dates.push_back(d);
    s.raw.push_back(v.first / static_cast<double>(parts.size()));
  }
  if (!s.dates.empty()) {
    s.coverage_start = s.dates.front();
    s.coverage_end = s.dates.back();
  }
  for (const auto& p : parts) s.warnings.insert(s.warnings.end(), p.warnings.begin(), p.warnings.end());
  return s;
}

/// Reindexes `series` onto the analysis `index` (missing where uncovered)
/// and standardizes it over the covered days of that index.
inline ExposureSeries align_and_standardize(const ExposureSeries& series, const std::vector<Date>& index) {
  ExposureSeries out;
  out.name = series.name;
  out.dates = index;
  out.raw.assign(index.size(), kMissing);
  out.warnings = series.warnings;
  std::map<Date, double> lookup;
  for (std::size_t i = 0; i < series.dates.size(); ++i) lookup.emplace(series.dates[i], series.raw[i]);
  bool any = false;
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (auto it = lookup.find(index[i]); it != lookup.end()) {
      out.raw[i] = it->second;
      if (!any) out.coverage_start = index[i];
      out.coverage_end = index[i];
      any = true;
    }
  }
  if (!any) throw Error("exposure '" + series.name + "' does not overlap the analysis index");
  try {
    out.z = zscore_full_sample(out.raw);
  } catch (const Error& e) {
    throw Error("exposure '" + series.name + "': " + e.what());
  }
  return out;
}

}  // namespace drift::ingest
