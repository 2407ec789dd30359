#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drift/common.hpp"

namespace drift::novelty {

// Two-sample statistics over row-per-point matrices.
//
// Within-sample expectations default to V-statistics: the average over all
// n^2 ordered pairs, self-pairs included. Both statistics are then
// nonnegative and vanish exactly when the two samples are the same multiset.
// The U-statistic variant (distinct pairs only) is unbiased but can go
// negative, e.g. energy({x,y},{x,y}) = -|x-y|. Under either convention a
// singleton contributes 0 to the energy within term and k(x,x) = 1 to the
// MMD^2 within term.

enum class Estimator { v_statistic, u_statistic };

namespace detail {

inline void check_samples(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() == 0 || b.rows() == 0) throw Error(std::string(op) + ": empty sample");
  if (a.cols() != b.cols()) throw Error(std::string(op) + ": samples differ in dimension");
}

/// Mean of f over within-sample pairs; `self` is f at distance zero.
template <class F>
double mean_within(const Eigen::MatrixXd& s, double self, Estimator est, F&& f) {
  const auto n = s.rows();
  if (n < 2) return self;
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) acc.add(f((s.row(i) - s.row(j)).squaredNorm()));
  }
  const double nn = static_cast<double>(n);
  if (est == Estimator::u_statistic) return acc.value() / (0.5 * nn * (nn - 1.0));
  return (2.0 * acc.value() + nn * self) / (nn * nn);
}

template <class F>
double mean_cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, F&& f) {
  CompensatedSum acc;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) acc.add(f((a.row(i) - b.row(j)).squaredNorm()));
  }
  return acc.value() / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

inline Eigen::MatrixXd stack(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  return pooled;
}

}  // namespace detail

/// Energy distance 2E|a-b| - E|a-a'| - E|b-b'| between two samples.
inline double energy_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              Estimator est = Estimator::v_statistic) {
  detail::check_samples(a, b, "energy_distance");
  const auto dist = [](double sq) { return std::sqrt(sq); };
  const double cross = detail::mean_cross(a, b, dist);
  const double within_a = detail::mean_within(a, 0.0, est, dist);
  const double within_b = detail::mean_within(b, 0.0, est, dist);
  return 2.0 * cross - within_a - within_b;
}

/// Median of pairwise Euclidean distances over distinct unordered pairs;
/// an even pair count averages the two middle values.
inline double median_pairwise_distance(const Eigen::MatrixXd& pooled) {
  const auto n = pooled.rows();
  if (n < 2) throw Error("median heuristic: need at least 2 points");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) d.push_back((pooled.row(i) - pooled.row(j)).norm());
  }
  const std::size_t mid = d.size() / 2;
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid), d.end());
  const double upper = d[mid];
  if (d.size() % 2 == 1) return upper;
  const double lower = *std::max_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// Mapping from the median pairwise distance m to the RBF parameter gamma.
enum class GammaRule {
  inverse_two_m2,  // gamma = 1 / (2 m^2)
  inverse_m2,      // gamma = 1 / m^2
};

inline double gamma_from_median(double m, GammaRule rule = GammaRule::inverse_two_m2) {
  if (!(m > 0.0)) throw Error("degenerate bandwidth: median pairwise distance is zero");
  return rule == GammaRule::inverse_two_m2 ? 1.0 / (2.0 * m * m) : 1.0 / (m * m);
}

inline double median_heuristic_gamma(const Eigen::MatrixXd& pooled, GammaRule rule = GammaRule::inverse_two_m2) {
  return gamma_from_median(median_pairwise_distance(pooled), rule);
}

/// Squared MMD with RBF kernel exp(-gamma |x-y|^2).
inline double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma,
                   Estimator est = Estimator::v_statistic) {
  detail::check_samples(a, b, "mmd2");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error("mmd2: gamma must be positive and finite");
  const auto k = [gamma](double sq) { return std::exp(-gamma * sq); };
  return detail::mean_within(a, 1.0, est, k) + detail::mean_within(b, 1.0, est, k) - 2.0 * detail::mean_cross(a, b, k);
}

/// Squared MMD with gamma chosen by the median heuristic on the pooled sample.
inline double mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                   GammaRule rule = GammaRule::inverse_two_m2, Estimator est = Estimator::v_statistic) {
  detail::check_samples(a, b, "mmd2");
  return mmd2(a, b, median_heuristic_gamma(detail::stack(a, b), rule), est);
}

}  // namespace drift::novelty
