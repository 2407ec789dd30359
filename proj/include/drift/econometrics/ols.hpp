#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drift/common.hpp"
#include "drift/econometrics/design.hpp"

namespace drift::econometrics {

struct RegressionResult {
  std::vector<std::string> labels;
  Eigen::VectorXd coef;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd xtx_inv;
  Eigen::MatrixXd hac_cov;  // empty until hac_covariance is applied
  int hac_bandwidth = -1;
  std::size_t n = 0;
  double r2 = 0.0;

  std::size_t index_of(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == label) return i;
    }
    throw Error("regression has no coefficient '" + label + "'");
  }
  double coefficient(const std::string& label) const { return coef(static_cast<Eigen::Index>(index_of(label))); }
};

/// Relative pivot size below which a column counts as collinear.
inline constexpr double kRankTolerance = 1e-10;

/// Least squares via column-pivoted QR.
inline RegressionResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, std::vector<std::string> labels = {}) {
  const auto n = X.rows();
  const auto k = X.cols();
  if (y.size() != n) throw Error("ols: design and outcome differ in length");
  if (labels.empty()) {
    for (Eigen::Index j = 0; j < k; ++j) labels.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(labels.size()) != k) throw Error("ols: label count does not match columns");
  if (n < k) throw Error("underdetermined design: " + std::to_string(n) + " rows for " + std::to_string(k) + " columns");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < k) {
    std::string cols;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < k; ++j) {
      if (!cols.empty()) cols += ", ";
      cols += labels[static_cast<std::size_t>(perm(j))];
    }
    throw Error("rank-deficient design; collinear columns: " + cols);
  }

  RegressionResult r;
  r.labels = std::move(labels);
  r.coef = qr.solve(y);
  r.residuals = y - X * r.coef;
  r.n = static_cast<std::size_t>(n);

  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv = R.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd inner = Rinv * Rinv.transpose();
  const auto P = qr.colsPermutation();
  r.xtx_inv = P * inner * P.transpose();

  const double ybar = y.mean();
  const double sst = (y.array() - ybar).square().sum();
  const double ssr = r.residuals.squaredNorm();
  r.r2 = sst > 0.0 ? 1.0 - ssr / sst : kMissing;
  return r;
}

inline RegressionResult ols(const Design& d) { return ols(d.X, d.y, d.labels); }

}  // namespace drift::econometrics
