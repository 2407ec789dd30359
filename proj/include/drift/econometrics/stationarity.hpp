#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drift/common.hpp"
#include "drift/econometrics/ols.hpp"

namespace drift::econometrics {

enum class Deterministic { constant, constant_trend };

inline std::string to_string(Deterministic d) { return d == Deterministic::constant ? "constant" : "constant+trend"; }

/// Significance levels in the order critical values are reported.
inline constexpr std::array<double, 3> kLevels = {0.01, 0.05, 0.10};

struct AdfResult {
  double statistic = 0.0;
  int lags = 0;
  std::size_t nobs = 0;
  std::array<double, 3> critical{};  // 1%, 5%, 10%
  std::array<bool, 3> reject{};      // unit root rejected at each level
};

struct KpssResult {
  double statistic = 0.0;
  int bandwidth = 0;
  std::array<double, 3> critical{};  // 1%, 5%, 10%
  std::array<bool, 3> reject{};      // stationarity rejected at each level
};

struct StationarityReport {
  Deterministic deterministic = Deterministic::constant;
  std::size_t n = 0;
  AdfResult adf;
  KpssResult kpss;
};

inline constexpr int kAdfMaxLag = 12;
inline constexpr std::size_t kMinStationarityLength = 25;

/// Finite-sample Dickey-Fuller critical values (MacKinnon response surface,
/// one variable): b0 + b1/T + b2/T^2 + b3/T^3.
inline std::array<double, 3> adf_critical_values(Deterministic d, std::size_t nobs) {
  static constexpr double kConstant[3][4] = {
      {-3.43035, -6.5393, -16.786, -79.433}, {-2.86154, -2.8903, -4.234, -40.04}, {-2.56677, -1.5384, -2.809, 0.0}};
  static constexpr double kTrend[3][4] = {
      {-3.95877, -9.0531, -28.428, -134.155}, {-3.41049, -4.3904, -9.036, -45.374}, {-3.12705, -2.5856, -3.925, -22.38}};
  const auto& table = d == Deterministic::constant ? kConstant : kTrend;
  const double inv = 1.0 / static_cast<double>(nobs);
  std::array<double, 3> out{};
  for (int i = 0; i < 3; ++i) {
    out[static_cast<std::size_t>(i)] = table[i][0] + table[i][1] * inv + table[i][2] * inv * inv + table[i][3] * inv * inv * inv;
  }
  return out;
}

/// Asymptotic KPSS critical values at 1%, 5%, 10%.
inline std::array<double, 3> kpss_critical_values(Deterministic d) {
  return d == Deterministic::constant ? std::array<double, 3>{0.739, 0.463, 0.347}
                                      : std::array<double, 3>{0.216, 0.146, 0.119};
}

namespace detail {

inline void check_series(const std::vector<double>& x, const char* op) {
  if (x.size() < kMinStationarityLength) {
    throw Error(std::string(op) + ": series length " + std::to_string(x.size()) + " below " + std::to_string(kMinStationarityLength));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(std::string(op) + ": series contains missing or non-finite values");
  }
  const auto m = sample_moments(x);
  if (!(m.sd > 0.0)) throw Error(std::string(op) + ": constant series");
}

/// Dickey-Fuller regression of dy_t on y_{t-1}, `lags` lagged differences and
/// the deterministic terms, over t = start .. end of the difference series.
struct AdfRegression {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
};

inline AdfRegression adf_regression(const std::vector<double>& x, Deterministic det, int lags, int first_lag_row) {
  const auto N = static_cast<int>(x.size());
  std::vector<double> dx(static_cast<std::size_t>(N - 1));
  for (int i = 1; i < N; ++i) dx[static_cast<std::size_t>(i - 1)] = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(i - 1)];
  const int rows = (N - 1) - first_lag_row;
  const int k = 1 + lags + (det == Deterministic::constant ? 1 : 2);
  AdfRegression r{Eigen::MatrixXd(rows, k), Eigen::VectorXd(rows)};
  for (int i = 0; i < rows; ++i) {
    const int t = first_lag_row + i;  // index into dx
    int c = 0;
    r.X(i, c++) = 1.0;
    if (det == Deterministic::constant_trend) r.X(i, c++) = static_cast<double>(t + 1);
    r.X(i, c++) = x[static_cast<std::size_t>(t)];  // y_{t-1} relative to dx[t] = x[t+1] - x[t]
    for (int l = 1; l <= lags; ++l) r.X(i, c++) = dx[static_cast<std::size_t>(t - l)];
    r.y(i) = dx[static_cast<std::size_t>(t)];
  }
  return r;
}

inline double aic(const RegressionResult& r) {
  const double n = static_cast<double>(r.n);
  return n * std::log(r.residuals.squaredNorm() / n) + 2.0 * static_cast<double>(r.coef.size());
}

}  // namespace detail

/// Augmented Dickey-Fuller test. The lag order minimizes AIC over
/// 0..12 on a common sample; the chosen model is then refit on all
/// available observations. The statistic is the OLS t-ratio on y_{t-1}.
inline AdfResult adf_test(const std::vector<double>& x, Deterministic det = Deterministic::constant) {
  detail::check_series(x, "adf");
  const int N = static_cast<int>(x.size());
  const int trend_terms = det == Deterministic::constant ? 1 : 2;
  const int max_lag = std::min(kAdfMaxLag, N / 2 - trend_terms - 1);
  if (max_lag < 0) throw Error("adf: series too short");
  int best = 0;
  double best_aic = std::numeric_limits<double>::infinity();
  for (int l = 0; l <= max_lag; ++l) {
    const auto reg = detail::adf_regression(x, det, l, max_lag);
    const double a = detail::aic(ols(reg.X, reg.y));
    if (a < best_aic) {
      best_aic = a;
      best = l;
    }
  }
  const auto reg = detail::adf_regression(x, det, best, best);
  const auto r = ols(reg.X, reg.y);
  const int rho = det == Deterministic::constant ? 1 : 2;
  const double dof = static_cast<double>(r.n) - static_cast<double>(r.coef.size());
  const double s2 = r.residuals.squaredNorm() / dof;
  AdfResult out;
  out.statistic = r.coef(rho) / std::sqrt(s2 * r.xtx_inv(rho, rho));
  out.lags = best;
  out.nobs = r.n;
  out.critical = adf_critical_values(det, out.nobs);
  for (std::size_t i = 0; i < 3; ++i) out.reject[i] = out.statistic < out.critical[i];
  return out;
}

/// Bartlett bandwidth floor(4 (n/100)^{1/4}).
inline int kpss_bandwidth(std::size_t n) {
  return static_cast<int>(std::floor(4.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
}

/// KPSS statistic: sum of squared partial sums of the detrended series over
/// n^2 times the Bartlett long-run variance.
inline KpssResult kpss_test(const std::vector<double>& x, Deterministic det = Deterministic::constant) {
  detail::check_series(x, "kpss");
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd X(n, det == Deterministic::constant ? 1 : 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    X(t, 0) = 1.0;
    if (det == Deterministic::constant_trend) X(t, 1) = static_cast<double>(t + 1);
    y(t) = x[static_cast<std::size_t>(t)];
  }
  const Eigen::VectorXd e = ols(X, y).residuals;
  KpssResult out;
  out.bandwidth = kpss_bandwidth(x.size());
  double partial = 0.0;
  double eta = 0.0;
  for (Eigen::Index t = 0; t < n; ++t) {
    partial += e(t);
    eta += partial * partial;
  }
  const double nn = static_cast<double>(n);
  eta /= nn * nn;
  double lrv = e.squaredNorm();
  for (int l = 1; l <= out.bandwidth; ++l) {
    const double w = 1.0 - static_cast<double>(l) / static_cast<double>(out.bandwidth + 1);
    lrv += 2.0 * w * e.tail(n - l).dot(e.head(n - l));
  }
  lrv /= nn;
  if (!(lrv > 0.0)) throw Error("kpss: non-positive long-run variance");
  out.statistic = eta / lrv;
  out.critical = kpss_critical_values(det);
  for (std::size_t i = 0; i < 3; ++i) out.reject[i] = out.statistic > out.critical[i];
  return out;
}

/// Both tests on the non-missing entries of `series`, in order.
inline StationarityReport stationarity_report(const Series& series, Deterministic det) {
  std::vector<double> x;
  for (double v : series) {
    if (!is_missing(v)) x.push_back(v);
  }
  StationarityReport rep;
  rep.deterministic = det;
  rep.n = x.size();
  rep.adf = adf_test(x, det);
  rep.kpss = kpss_test(x, det);
  return rep;
}

}  // namespace drift::econometrics
