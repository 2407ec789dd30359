#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drift/common.hpp"
#include "drift/ingest/controls.hpp"

namespace drift::econometrics {

/// Lag/lead structure and inference settings for one regression.
struct RegressionSpec {
  int p = 7;              // outcome lags
  int q = 3;              // exposure lags (0 = contemporaneous only)
  int leads = 0;          // exposure leads
  int hac_bandwidth = 7;  // Newey-West H
  std::vector<std::string> controls;  // control families/labels to include
  bool include_trend = false;
  std::optional<Date> sample_start;  // outcome-date bounds, inclusive
  std::optional<Date> sample_end;

  void validate() const {
    if (p < 0 || q < 0 || leads < 0 || hac_bandwidth < 0) throw Error("regression spec: p, q, leads and H must be >= 0");
  }
};

/// The regressand is sum_{j=from}^{to} Y_{t+j}. ARDL regressions use [0, 0];
/// local projections shift it to [h, h] or a cumulative window.
struct OutcomeWindow {
  int from = 0;
  int to = 0;
};

struct Design {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<std::string> labels;
  std::vector<std::size_t> rows;  // positions t in the daily index, increasing
  std::vector<std::string> dropped_controls;

  std::size_t n() const { return rows.size(); }

  std::size_t column(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) throw Error("design has no column '" + label + "'");
    return static_cast<std::size_t>(it - labels.begin());
  }
};

inline std::string y_lag_label(int i) { return "Y_lag" + std::to_string(i); }
inline std::string e_lag_label(int j) { return "E_lag" + std::to_string(j); }
inline std::string e_lead_label(int h) { return "E_lead" + std::to_string(h); }

/// Builds the aligned regression for outcome Y and exposure E on a common
/// daily index. Columns, in order: const, Y_lag1..p, E_lag0..q,
/// E_lead1..L, selected controls, optional trend. Y lags count back from
/// t, or from t+from when the outcome window starts before t, so they
/// always precede the outcome. Any row with a missing entry is dropped.
/// Control columns that are constant over the kept rows are dropped, as is
/// the first remaining dummy of an indicator family whose reference
/// category never occurs in the sample.
inline Design build_design(const Series& Y, const Series& E, const ingest::ControlMatrix& controls,
                           const RegressionSpec& spec, OutcomeWindow window = {}) {
  spec.validate();
  if (window.from > window.to) throw Error("outcome window start exceeds its end");
  const std::size_t T = Y.size();
  if (E.size() != T) throw Error("outcome and exposure series differ in length");
  const auto selected = controls.select(spec.controls);
  if (!selected.columns.empty() && selected.rows() != T) throw Error("control rows do not match the daily index");
  if ((spec.sample_start || spec.sample_end) && controls.dates.size() != T) {
    throw Error("sample bounds need a dated control matrix");
  }

  const long lag_anchor = std::min(0, window.from);
  const auto at = [T](const Series& s, long t) { return t < 0 || t >= static_cast<long>(T) ? kMissing : s[static_cast<std::size_t>(t)]; };

  std::vector<std::string> labels{"const"};
  for (int i = 1; i <= spec.p; ++i) labels.push_back(y_lag_label(i));
  for (int j = 0; j <= spec.q; ++j) labels.push_back(e_lag_label(j));
  for (int h = 1; h <= spec.leads; ++h) labels.push_back(e_lead_label(h));
  const std::size_t first_control = labels.size();

  std::vector<std::vector<double>> rows;
  std::vector<double> ys;
  std::vector<std::size_t> used;
  for (std::size_t ti = 0; ti < T; ++ti) {
    const long t = static_cast<long>(ti);
    if (spec.sample_start && controls.dates[ti] < *spec.sample_start) continue;
    if (spec.sample_end && controls.dates[ti] > *spec.sample_end) continue;
    double target = 0.0;
    for (int j = window.from; j <= window.to; ++j) target += at(Y, t + j);
    std::vector<double> r{1.0};
    r.reserve(labels.size() + selected.columns.size() + 1);
    for (int i = 1; i <= spec.p; ++i) r.push_back(at(Y, t + lag_anchor - i));
    for (int j = 0; j <= spec.q; ++j) r.push_back(at(E, t - j));
    for (int h = 1; h <= spec.leads; ++h) r.push_back(at(E, t + h));
    for (const auto& c : selected.columns) r.push_back(c.values[ti]);
    if (spec.include_trend) r.push_back(static_cast<double>(ti));
    if (is_missing(target) || std::any_of(r.begin(), r.end(), [](double v) { return is_missing(v); })) continue;
    rows.push_back(std::move(r));
    ys.push_back(target);
    used.push_back(ti);
  }

  // Decide which control columns survive on the kept rows.
  std::vector<bool> keep(selected.columns.size(), true);
  Design d;
  for (std::size_t c = 0; c < selected.columns.size(); ++c) {
    const std::size_t col = first_control + c;
    const bool constant = rows.empty() || std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r[col] == rows.front()[col]; });
    if (constant) keep[c] = false;
  }
  std::map<std::string, std::vector<std::size_t>> families;
  for (std::size_t c = 0; c < selected.columns.size(); ++c) {
    if (keep[c] && selected.columns[c].indicator) families[selected.columns[c].family].push_back(c);
  }
  for (const auto& [family, cols] : families) {
    if (cols.size() < 2) continue;
    const bool saturated = std::all_of(rows.begin(), rows.end(), [&](const auto& r) {
      double s = 0.0;
      for (auto c : cols) s += r[first_control + c];
      return s == 1.0;
    });
    if (saturated) keep[cols.front()] = false;
  }
  for (std::size_t c = 0; c < selected.columns.size(); ++c) {
    if (keep[c]) {
      labels.push_back(selected.columns[c].label);
    } else {
      d.dropped_controls.push_back(selected.columns[c].label);
    }
  }
  if (spec.include_trend) labels.push_back("trend");

  const std::size_t k = labels.size();
  if (rows.size() < k) {
    throw Error("underdetermined design: " + std::to_string(rows.size()) + " usable rows for " + std::to_string(k) + " columns");
  }
  d.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(k));
  d.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Eigen::Index out = 0;
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      const bool is_control = c >= first_control && c < first_control + selected.columns.size();
      if (is_control && !keep[c - first_control]) continue;
      d.X(static_cast<Eigen::Index>(i), out++) = rows[i][c];
    }
    d.y(static_cast<Eigen::Index>(i)) = ys[i];
  }
  d.labels = std::move(labels);
  d.rows = std::move(used);
  return d;
}

}  // namespace drift::econometrics
