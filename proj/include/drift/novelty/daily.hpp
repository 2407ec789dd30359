#pragma once

#include <charconv>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "drift/common.hpp"
#include "drift/ingest/buckets.hpp"
#include "drift/novelty/distances.hpp"
#include "drift/novelty/whitening.hpp"

namespace drift::novelty {

enum class Metric { energy, mmd2 };

inline std::string to_string(Metric m) { return m == Metric::energy ? "energy" : "mmd2"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "energy") return Metric::energy;
  if (s == "mmd2") return Metric::mmd2;
  throw Error("unknown novelty metric '" + s + "' (expected energy or mmd2)");
}

struct NoveltyConfig {
  Metric metric = Metric::energy;
  int window_days = 7;
  int min_day_posts = 3;
  int min_ref_posts = 10;
  GammaRule gamma_rule = GammaRule::inverse_two_m2;
  Estimator estimator = Estimator::v_statistic;

  static NoveltyConfig defaults_for(Metric m) {
    NoveltyConfig c;
    c.metric = m;
    c.window_days = m == Metric::energy ? 7 : 30;
    return c;
  }

  void validate() const {
    if (window_days < 1) throw Error("novelty window_days must be >= 1");
    if (min_day_posts < 1 || min_ref_posts < 1) throw Error("novelty thresholds must be >= 1");
  }
};

enum class Gate { ok, low_sample, zero_post };

inline const char* to_string(Gate g) {
  switch (g) {
    case Gate::ok:
      return "ok";
    case Gate::low_sample:
      return "low_sample";
    case Gate::zero_post:
      return "zero_post";
  }
  return "?";
}

/// Per-day novelty. `value` (N_t) is missing exactly on gated days; `z`
/// stays empty until standardize_novelty fills it.
struct NoveltySeries {
  Metric metric = Metric::energy;
  std::vector<Date> dates;
  Series value;
  Series z;
  std::vector<std::size_t> day_posts;
  std::vector<std::size_t> ref_posts;
  std::vector<Gate> gate;

  std::size_t size() const { return dates.size(); }
};

inline Gate gate_for(std::size_t day_posts, std::size_t ref_posts, const NoveltyConfig& cfg) {
  if (day_posts == 0) return Gate::zero_post;
  if (day_posts < static_cast<std::size_t>(cfg.min_day_posts)) return Gate::low_sample;
  if (ref_posts < static_cast<std::size_t>(cfg.min_ref_posts)) return Gate::low_sample;
  return Gate::ok;
}

namespace detail {

inline Eigen::MatrixXd gather(const Eigen::MatrixXd& src, const std::vector<std::size_t>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = src.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

/// MMD^2 for the daily series. A zero median distance (over half of the
/// pooled pairs coincide) falls back to the mean pairwise distance; a pooled
/// sample of one repeated point has MMD^2 = 0 for any bandwidth.
inline double daily_mmd2(const Eigen::MatrixXd& day, const Eigen::MatrixXd& ref, GammaRule rule, Estimator est) {
  const Eigen::MatrixXd pooled = stack(day, ref);
  double m = median_pairwise_distance(pooled);
  if (m == 0.0) {
    CompensatedSum s;
    const auto n = pooled.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i + 1; j < n; ++j) s.add((pooled.row(i) - pooled.row(j)).norm());
    }
    m = s.value() / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
    if (m == 0.0) return 0.0;
  }
  return mmd2(day, ref, gamma_from_median(m, rule), est);
}

}  // namespace detail

/// Computes N_t for every bucket: day t against the pooled posts of days
/// t-W .. t-1 (all posts in the window, gated or not). Days failing either
/// threshold are flagged and left missing. Days are independent, so
/// `threads` only changes wall time, never the values.
inline NoveltySeries daily_novelty(const std::vector<ingest::DailyBucket>& buckets, const EmbeddingMatrix& embeddings,
                                   const NoveltyConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const std::size_t n = buckets.size();
  for (std::size_t t = 0; t < n; ++t) {
    if (t > 0 && !(buckets[t].date > buckets[t - 1].date)) throw Error("daily_novelty: bucket dates not increasing");
    for (auto r : buckets[t].embedding_rows) {
      if (r >= static_cast<std::size_t>(embeddings.rows())) {
        throw Error("daily_novelty: embedding row " + std::to_string(r) + " out of range on " + format_date(buckets[t].date));
      }
    }
  }
  NoveltySeries out;
  out.metric = cfg.metric;
  out.dates = ingest::bucket_dates(buckets);
  out.value.assign(n, kMissing);
  out.day_posts.assign(n, 0);
  out.ref_posts.assign(n, 0);
  out.gate.assign(n, Gate::low_sample);
  const auto window = static_cast<long>(cfg.window_days);
  for (std::size_t t = 0; t < n; ++t) {
    out.day_posts[t] = buckets[t].post_count;
    std::size_t ref = 0;
    for (std::size_t s = 0; s < t; ++s) {
      const long lag = buckets[t].date - buckets[s].date;
      if (lag >= 1 && lag <= window) ref += buckets[s].post_count;
    }
    out.ref_posts[t] = ref;
    out.gate[t] = gate_for(out.day_posts[t], ref, cfg);
  }
  parallel_for(n, threads, [&](std::size_t t) {
    if (out.gate[t] != Gate::ok) return;
    std::vector<std::size_t> ref_rows;
    ref_rows.reserve(out.ref_posts[t]);
    for (std::size_t s = 0; s < t; ++s) {
      const long lag = buckets[t].date - buckets[s].date;
      if (lag >= 1 && lag <= window) {
        ref_rows.insert(ref_rows.end(), buckets[s].embedding_rows.begin(), buckets[s].embedding_rows.end());
      }
    }
    const Eigen::MatrixXd day = detail::gather(embeddings.values, buckets[t].embedding_rows);
    const Eigen::MatrixXd ref = detail::gather(embeddings.values, ref_rows);
    out.value[t] = cfg.metric == Metric::energy ? energy_distance(day, ref, cfg.estimator)
                                                 : detail::daily_mmd2(day, ref, cfg.gamma_rule, cfg.estimator);
  });
  return out;
}

/// Fills `z` by standardizing N_t over the gated-ok days (sample sd).
inline NoveltySeries standardize_novelty(NoveltySeries series) {
  const auto m = sample_moments(series.value);
  if (m.count < 2) throw Error("standardize_novelty: fewer than 2 gated-ok days");
  if (!(m.sd > 0.0)) throw Error("standardize_novelty: degenerate variance");
  series.z.assign(series.size(), kMissing);
  for (std::size_t t = 0; t < series.size(); ++t) {
    if (!is_missing(series.value[t])) series.z[t] = (series.value[t] - m.mean) / m.sd;
  }
  return series;
}

inline std::string format_real(double v) {
  if (is_missing(v)) return {};
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

/// CSV: date,N_t,N_tz,day_posts,ref_posts,gate_flag; missing cells are empty.
inline void write_novelty_csv(std::ostream& out, const NoveltySeries& s) {
  out << "date,N_t,N_tz,day_posts,ref_posts,gate_flag\n";
  for (std::size_t t = 0; t < s.size(); ++t) {
    out << format_date(s.dates[t]) << ',' << format_real(s.value[t]) << ','
        << format_real(s.z.empty() ? kMissing : s.z[t]) << ',' << s.day_posts[t] << ',' << s.ref_posts[t] << ','
        << to_string(s.gate[t]) << '\n';
  }
}

}  // namespace drift::novelty
