#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "absl/time/civil_time.h"
#include "drift/common.hpp"

namespace drift::ingest {

struct ControlColumn {
  std::string label;
  /// Indicator family ("dow", "month") or the label itself for single columns.
  std::string family;
  bool indicator = false;
  Series values;
};

/// Calendar and posting-intensity regressors, one row per analysis day.
struct ControlMatrix {
  std::vector<Date> dates;
  std::vector<ControlColumn> columns;

  /// Keeps columns whose family or label appears in `keys`, preserving the
  /// canonical column order.
  ControlMatrix select(const std::vector<std::string>& keys) const {
    ControlMatrix out;
    out.dates = dates;
    for (const auto& key : keys) {
      const bool known = std::any_of(columns.begin(), columns.end(), [&](const ControlColumn& c) {
        return c.family == key || c.label == key;
      });
      if (!known) throw Error("unknown control '" + key + "'");
    }
    for (const auto& c : columns) {
      if (std::find(keys.begin(), keys.end(), c.family) != keys.end() ||
          std::find(keys.begin(), keys.end(), c.label) != keys.end()) {
        out.columns.push_back(c);
      }
    }
    return out;
  }

  std::size_t rows() const { return dates.size(); }
};

inline constexpr std::array<const char*, 6> kWeekdayLabels = {"dow_mon", "dow_tue", "dow_wed",
                                                               "dow_thu", "dow_fri", "dow_sat"};
inline constexpr std::array<const char*, 11> kMonthLabels = {"month_feb", "month_mar", "month_apr", "month_may",
                                                             "month_jun", "month_jul", "month_aug", "month_sep",
                                                             "month_oct", "month_nov", "month_dec"};

/// Builds day-of-week dummies (Sunday omitted), month-of-year dummies
/// (January omitted), the post-inauguration indicator (1 from the
/// inauguration day on) and, when `post_counts` is given, `post_count` and
/// `log1p_post_count`.
inline ControlMatrix calendar_controls(const std::vector<Date>& dates, Date inauguration,
                                       const Series& post_counts = {}) {
  for (std::size_t i = 1; i < dates.size(); ++i) {
    if (dates[i] - dates[i - 1] != 1) throw Error("calendar_controls: dates are not a contiguous daily index");
  }
  if (!post_counts.empty() && post_counts.size() != dates.size()) {
    throw Error("calendar_controls: post_counts length does not match dates");
  }
  const std::size_t n = dates.size();
  ControlMatrix m;
  m.dates = dates;
  for (const char* label : kWeekdayLabels) m.columns.push_back({label, "dow", true, Series(n, 0.0)});
  for (const char* label : kMonthLabels) m.columns.push_back({label, "month", true, Series(n, 0.0)});
  m.columns.push_back({"post_inauguration", "post_inauguration", true, Series(n, 0.0)});
  for (std::size_t i = 0; i < n; ++i) {
    const auto wd = absl::GetWeekday(dates[i]);
    const int dow = wd == absl::Weekday::sunday ? -1 : static_cast<int>(wd);  // monday == 0
    if (dow >= 0 && dow < 6) m.columns[static_cast<std::size_t>(dow)].values[i] = 1.0;
    const int month = absl::CivilMonth(dates[i]).month();
    if (month > 1) m.columns[6 + static_cast<std::size_t>(month - 2)].values[i] = 1.0;
    m.columns[17].values[i] = dates[i] >= inauguration ? 1.0 : 0.0;
  }
  if (!post_counts.empty()) {
    Series logs(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (post_counts[i] < 0) throw Error("calendar_controls: negative post count");
      logs[i] = std::log1p(post_counts[i]);
    }
    m.columns.push_back({"post_count", "post_count", false, post_counts});
    m.columns.push_back({"log1p_post_count", "log1p_post_count", false, std::move(logs)});
  }
  return m;
}

}  // namespace drift::ingest
