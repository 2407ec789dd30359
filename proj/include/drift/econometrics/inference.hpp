#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "drift/common.hpp"
#include "drift/econometrics/ols.hpp"

namespace drift::econometrics {

/// Two-sided p-value of a standard-normal statistic.
inline double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

/// Upper tail of the chi-square distribution.
inline double chi2_sf(double x, int df) {
  if (df <= 0) throw Error("chi2_sf: df must be positive");
  if (x <= 0.0) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

struct LinearComboTest {
  double estimate = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p = 1.0;
};

/// Tests w'beta = 0 with the HAC covariance of `r`.
inline LinearComboTest linear_combo(const RegressionResult& r, const Eigen::VectorXd& weights) {
  if (weights.size() != r.coef.size()) throw Error("linear_combo: weight vector length does not match coefficients");
  if (r.hac_cov.size() == 0) throw Error("linear_combo: regression has no HAC covariance");
  const double var = weights.dot(r.hac_cov * weights);
  if (!(var > 0.0)) throw Error("linear_combo: non-positive variance w'Vw");
  LinearComboTest out;
  out.estimate = weights.dot(r.coef);
  out.se = std::sqrt(var);
  out.t = out.estimate / out.se;
  out.p = normal_two_sided_p(out.t);
  return out;
}

/// Weight vector with 1 on each named coefficient.
inline Eigen::VectorXd sum_weights(const RegressionResult& r, const std::vector<std::string>& labels) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(r.coef.size());
  for (const auto& l : labels) w(static_cast<Eigen::Index>(r.index_of(l))) += 1.0;
  return w;
}

inline LinearComboTest sum_test(const RegressionResult& r, const std::vector<std::string>& labels) {
  return linear_combo(r, sum_weights(r, labels));
}

struct WaldTest {
  double statistic = 0.0;
  int df = 0;
  double p = 1.0;
};

/// Joint Wald test that the named coefficients are all zero, using the
/// HAC covariance block.
inline WaldTest wald_zero(const RegressionResult& r, const std::vector<std::string>& labels) {
  if (labels.empty()) throw Error("wald: no coefficients named");
  if (r.hac_cov.size() == 0) throw Error("wald: regression has no HAC covariance");
  const auto m = static_cast<Eigen::Index>(labels.size());
  Eigen::VectorXd b(m);
  Eigen::MatrixXd V(m, m);
  std::vector<Eigen::Index> idx;
  for (const auto& l : labels) idx.push_back(static_cast<Eigen::Index>(r.index_of(l)));
  for (Eigen::Index i = 0; i < m; ++i) {
    b(i) = r.coef(idx[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < m; ++j) V(i, j) = r.hac_cov(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(V);
  const auto d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 1e-14 * std::max(1.0, d.cwiseAbs().maxCoeff()))) {
    throw Error("wald: singular covariance block");
  }
  WaldTest w;
  w.statistic = b.dot(ldlt.solve(b));
  w.df = static_cast<int>(m);
  w.p = chi2_sf(w.statistic, w.df);
  return w;
}

}  // namespace drift::econometrics
