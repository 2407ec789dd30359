#pragma once

#include <string>

#include <Eigen/Dense>

#include "drift/common.hpp"
#include "drift/econometrics/ols.hpp"

namespace drift::econometrics {

/// Newey-West long-run covariance of the scores x_t e_t with Bartlett
/// weights 1 - l/(H+1), l = 1..H. Rows must be in time order.
inline Eigen::MatrixXd newey_west_meat(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals, int H) {
  const auto n = X.rows();
  if (residuals.size() != n) throw Error("hac: residual count does not match design rows");
  if (H < 0) throw Error("hac: bandwidth must be >= 0");
  if (H >= n) throw Error("hac: bandwidth " + std::to_string(H) + " must be below the sample size " + std::to_string(n));
  const Eigen::MatrixXd scores = X.array().colwise() * residuals.array();
  Eigen::MatrixXd omega = scores.transpose() * scores;
  for (int l = 1; l <= H; ++l) {
    const double w = 1.0 - static_cast<double>(l) / static_cast<double>(H + 1);
    const Eigen::MatrixXd gamma = scores.bottomRows(n - l).transpose() * scores.topRows(n - l);
    omega += w * (gamma + gamma.transpose());
  }
  return omega;
}

/// Sandwich (X'X)^-1 Omega (X'X)^-1 with no small-sample scaling.
inline Eigen::MatrixXd hac_covariance(const Eigen::MatrixXd& xtx_inv, const Eigen::MatrixXd& X,
                                      const Eigen::VectorXd& residuals, int H) {
  const Eigen::MatrixXd v = xtx_inv * newey_west_meat(X, residuals, H) * xtx_inv;
  return 0.5 * (v + v.transpose());
}

/// Attaches the HAC covariance to an OLS result fitted on `X`.
inline RegressionResult with_hac(RegressionResult r, const Eigen::MatrixXd& X, int H) {
  r.hac_cov = hac_covariance(r.xtx_inv, X, r.residuals, H);
  r.hac_bandwidth = H;
  return r;
}

/// OLS on a design followed by HAC(H) covariance.
inline RegressionResult fit_hac(const Design& d, int H) { return with_hac(ols(d), d.X, H); }

}  // namespace drift::econometrics
