// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any line fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "drift/econometrics/models.hpp"
#include "drift/novelty/daily.hpp"
#include "drift/novelty/distances.hpp"
#include "drift/novelty/whitening.hpp"
#include "drift/pipeline/stages.hpp"
#include "simulate.hpp"
#include "test_support.hpp"

using namespace drift;
namespace em = drift::econometrics;
namespace nv = drift::novelty;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int failures = 0;

void report(const std::string& name, const std::function<Outcome()>& check) {
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s  %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
  std::fflush(stdout);
  failures += !o.pass;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Eigen::MatrixXd normal_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

// all-pairs references over ordered pairs, self-pairs included
double pair_dist(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
  return std::sqrt(s);
}

template <class K>
double all_pairs_mean(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, K k) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) acc += k(pair_dist(a, i, b, j));
  }
  return acc / static_cast<double>(a.rows() * b.rows());
}

double energy_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  auto id = [](double d) { return d; };
  return 2.0 * all_pairs_mean(a, b, id) - all_pairs_mean(a, a, id) - all_pairs_mean(b, b, id);
}

double mmd2_oracle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<double> d;
  Eigen::MatrixXd p(a.rows() + b.rows(), a.cols());
  p << a, b;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < p.rows(); ++j) d.push_back(pair_dist(p, i, p, j));
  }
  std::sort(d.begin(), d.end());
  const double m = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
  const double gamma = 1.0 / (2.0 * m * m);
  auto k = [gamma](double x) { return std::exp(-gamma * x * x); };
  return all_pairs_mean(a, a, k) + all_pairs_mean(b, b, k) - 2.0 * all_pairs_mean(a, b, k);
}

Outcome distances() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 6), dim(1, 8);
  double worst = 0.0, worst_self = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int d = dim(rng);
    const auto a = normal_matrix(rng, size(rng), d);
    const auto b = normal_matrix(rng, size(rng), d);
    worst = std::max(worst, std::abs(nv::energy_distance(a, b) - energy_oracle(a, b)));
    worst = std::max(worst, std::abs(nv::mmd2(a, b) - mmd2_oracle(a, b)));
    worst_self = std::max(worst_self, std::abs(nv::energy_distance(a, a)));
    if (a.rows() > 1) worst_self = std::max(worst_self, std::abs(nv::mmd2(a, a)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && worst_self <= 1e-12 && secs < 5.0,
          "200 pairs, max |lib - oracle| = " + fmt("%.2e", worst) + ", max identical-sample value = " + fmt("%.2e", worst_self) +
              ", " + fmt("%.3f", secs) + " s"};
}

double identity_gap(const Eigen::MatrixXd& w) {
  const Eigen::MatrixXd c = w.rowwise() - w.colwise().mean();
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(w.rows() - 1);
  return (cov - Eigen::MatrixXd::Identity(cov.rows(), cov.cols())).cwiseAbs().maxCoeff();
}

Outcome whitening() {
  std::mt19937_64 rng(32);
  // correlated columns with unequal scales
  const Eigen::MatrixXd mix = normal_matrix(rng, 32, 32);
  const Eigen::MatrixXd x = normal_matrix(rng, 500, 32) * mix;
  const auto model = nv::fit_whitener({x, nv::Stage::raw});
  const double gap = identity_gap(nv::apply_whitener(model, x).values);

  Eigen::MatrixXd deficient = x;
  deficient.col(7).setConstant(3.0);
  const auto dm = nv::fit_whitener({deficient, nv::Stage::raw});
  const auto dw = nv::apply_whitener(dm, deficient).values;
  const double dgap = identity_gap(dw);
  const bool ok = gap < 1e-6 && model.components() == 32 && dm.components() == 31 && dw.cols() == 31 && dgap < 1e-6;
  return {ok, "500x32 max |cov - I| = " + fmt("%.2e", gap) + "; constant column -> " + std::to_string(dm.components()) +
                  " components, max |cov - I| = " + fmt("%.2e", dgap)};
}

Outcome hac() {
  const std::vector<double> xs{1, 2, 4, 3, 5, 7};
  const std::vector<double> ys{1.2, 1.9, 4.1, 3.3, 4.8, 7.4};
  Eigen::MatrixXd X(6, 2);
  Eigen::VectorXd y(6);
  for (int t = 0; t < 6; ++t) {
    X(t, 0) = 1.0;
    X(t, 1) = xs[static_cast<std::size_t>(t)];
    y(t) = ys[static_cast<std::size_t>(t)];
  }
  const auto r = em::ols(X, y);
  const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  double worst = 0.0;
  for (int H = 0; H <= 5; ++H) {
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(2, 2);
    for (int t = 0; t < 6; ++t) {
      for (int s = 0; s < 6; ++s) {
        const int lag = std::abs(t - s);
        if (lag > H) continue;
        const double w = 1.0 - static_cast<double>(lag) / (H + 1);
        meat += w * r.residuals(t) * r.residuals(s) * X.row(t).transpose() * X.row(s);
      }
    }
    const Eigen::MatrixXd expect = bread * meat * bread;
    worst = std::max(worst, (em::hac_covariance(r.xtx_inv, X, r.residuals, H) - expect).cwiseAbs().maxCoeff());
  }
  Eigen::MatrixXd hc0 = Eigen::MatrixXd::Zero(2, 2);
  for (int t = 0; t < 6; ++t) hc0 += r.residuals(t) * r.residuals(t) * X.row(t).transpose() * X.row(t);
  const bool exact = (em::newey_west_meat(X, r.residuals, 0) - hc0).cwiseAbs().maxCoeff() == 0.0;
  const double sandwich = (em::hac_covariance(r.xtx_inv, X, r.residuals, 0) - r.xtx_inv * hc0 * r.xtx_inv).cwiseAbs().maxCoeff();
  return {worst <= 1e-12 && exact && sandwich == 0.0,
          "max |NW - double sum| over H=0..5 = " + fmt("%.2e", worst) + "; H=0 meat equals HC0 meat " +
              (exact ? "exactly" : "NOT exactly") + ", sandwich gap " + fmt("%.1e", sandwich)};
}

Outcome dgp_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  em::RegressionSpec s;
  s.p = 7;
  s.q = 3;
  s.hac_bandwidth = 7;
  s.controls = {};
  em::RegressionSpec sl = s;
  sl.leads = 3;
  const int seeds = 200;
  int cover = 0, lead_reject = 0, pre_reject = 0;
  for (int seed = 0; seed < seeds; ++seed) {
    const auto sim = drift::testing::simulate_ardl(static_cast<std::uint64_t>(seed), 300, 0.3, drift::testing::kHeadlineBeta);
    const auto f = em::fit_ardl(sim.Y, sim.E, {}, s);
    cover += std::abs(f.beta_sum.estimate - 0.28) <= 1.959963984540054 * f.beta_sum.se;
    lead_reject += em::fit_ardl(sim.Y, sim.E, {}, sl).delta_sum->p < 0.05;
    pre_reject += em::joint_pretrend_wald(sim.Y, sim.E, {}, s, 5).wald.p < 0.05;
  }
  const double secs = seconds_since(t0);
  const double c = static_cast<double>(cover) / seeds;
  const double l = static_cast<double>(lead_reject) / seeds;
  const double p = static_cast<double>(pre_reject) / seeds;
  const bool ok = c >= 0.90 && l <= 0.10 && p <= 0.10 && secs < 60.0;
  return {ok, "n=300, 200 seeds: beta_sum 95% coverage " + fmt("%.3f", c) + (c >= 0.90 ? " (ok)" : " (>=0.90 required)") +
                  ", delta_sum rejection " + fmt("%.3f", l) + (l <= 0.10 ? " (ok)" : " (<=0.10 required)") +
                  ", pre-trend Wald rejection " + fmt("%.3f", p) + (p <= 0.10 ? " (ok)" : " (<=0.10 required)") + ", " +
                  fmt("%.1f", secs) + " s"};
}

Outcome lp_consistency() {
  const auto sim = drift::testing::simulate_ardl(37, 300, 0.3, drift::testing::kHeadlineBeta);
  em::RegressionSpec s;
  s.p = 7;
  s.q = 0;
  s.hac_bandwidth = 7;
  s.controls = {};
  const auto ardl = em::fit_ardl(sim.Y, sim.E, {}, s);
  const auto lp = em::local_projection(sim.Y, sim.E, {}, s, 0);
  const auto cum = em::cumulative_lp(sim.Y, sim.E, {}, s, 0, 0);
  const double coef = ardl.result.coefficient(em::e_lag_label(0));
  const bool ok = lp.test.estimate == coef && cum.test.estimate == lp.test.estimate && cum.test.se == lp.test.se;
  return {ok, "theta_0 = " + fmt("%.17g", lp.test.estimate) + ", ARDL(q=0) = " + fmt("%.17g", coef) +
                  ", cumulative(0,0) = " + fmt("%.17g", cum.test.estimate)};
}

Outcome gating() {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> count(0, 6);
  std::vector<ingest::DailyBucket> buckets;
  std::size_t row = 0;
  for (int d = 0; d < 60; ++d) {
    ingest::DailyBucket b;
    b.date = Date(2025, 1, 1) + d;
    b.post_count = static_cast<std::size_t>(count(rng));
    for (std::size_t k = 0; k < b.post_count; ++k) b.embedding_rows.push_back(row++);
    buckets.push_back(b);
  }
  const auto emb = nv::unit_normalize(normal_matrix(rng, static_cast<Eigen::Index>(row), 5));
  std::size_t mismatches = 0, low = 0, zero = 0;
  for (auto metric : {nv::Metric::energy, nv::Metric::mmd2}) {
    auto cfg = nv::NoveltyConfig::defaults_for(metric);
    const auto s = nv::standardize_novelty(nv::daily_novelty(buckets, emb, cfg, 2));
    for (std::size_t t = 0; t < buckets.size(); ++t) {
      std::size_t ref = 0;
      for (std::size_t k = 1; k <= static_cast<std::size_t>(cfg.window_days) && k <= t; ++k) ref += buckets[t - k].post_count;
      const auto n = buckets[t].post_count;
      const auto expect = n == 0 ? nv::Gate::zero_post
                          : (n < static_cast<std::size_t>(cfg.min_day_posts) || ref < static_cast<std::size_t>(cfg.min_ref_posts))
                              ? nv::Gate::low_sample
                              : nv::Gate::ok;
      low += expect == nv::Gate::low_sample;
      zero += expect == nv::Gate::zero_post;
      mismatches += s.gate[t] != expect;
      mismatches += is_missing(s.value[t]) != (expect != nv::Gate::ok);
      mismatches += is_missing(s.z[t]) != (expect != nv::Gate::ok);
    }
  }
  return {mismatches == 0 && low > 0 && zero > 0,
          "60 days x 2 metrics, " + std::to_string(low) + " low-sample and " + std::to_string(zero) + " zero-post day flags, " +
              std::to_string(mismatches) + " mismatches against a direct scan"};
}

double sidecar_value(const fs::path& file, const std::string& row_prefix, const std::string& column) {
  const auto j = pipeline::json::parse(drift::testing::read_text(file));
  for (const auto& row : j["rows"]) {
    if (row[0]["text"].get<std::string>().rfind(row_prefix, 0) != 0) continue;
    for (const auto& c : row) {
      if (c["column"] == column) return c["value"].is_number() ? c["value"].get<double>() : kMissing;
    }
  }
  throw Error(file.filename().string() + ": no row starting with '" + row_prefix + "'");
}

Outcome replication() {
  const char* env = std::getenv("DRIFT_REPLICATION_CONFIG");
  if (!env || !*env) return {true, "skipped: DRIFT_REPLICATION_CONFIG not set"};
  if (!fs::is_regular_file(env)) return {true, std::string("skipped: ") + env + " not found"};
  drift::testing::TempDir out("replication");
  const auto cfg = pipeline::load_config(env, {"output_dir=\"" + (out / "bundle").string() + "\""});
  pipeline::run(cfg, "main-table");
  pipeline::run(cfg, "falsify");
  pipeline::run(cfg, "irf");
  const auto dir = cfg.output_dir;
  std::vector<std::string> misses;
  const auto near = [&](const std::string& what, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) misses.push_back(what + " " + fmt("%.4f", got) + " vs " + fmt("%.3f", want));
  };
  near("beta_sum q=3", sidecar_value(dir / "table_main.json", "q=3", "beta_sum"), 0.285, 0.01);
  const double n = sidecar_value(dir / "table_main.json", "q=3", "n");
  if (n != 256.0) misses.push_back("n q=3 " + fmt("%.0f", n) + " vs 256");
  near("delta_sum", sidecar_value(dir / "table_main.json", "Leads sum", "beta_sum"), -0.042, 0.01);
  near("Taylor Swift beta_sum", sidecar_value(dir / "table_falsification.json", "Taylor Swift", "beta_sum"), -0.136, 0.01);
  near("Taylor Swift p", sidecar_value(dir / "table_falsification.json", "Taylor Swift", "p_HAC"), 0.098, 0.01);
  near("NCAA beta_sum", sidecar_value(dir / "table_falsification.json", "NCAA", "beta_sum"), 0.026, 0.01);
  near("NCAA p", sidecar_value(dir / "table_falsification.json", "NCAA", "p_HAC"), 0.635, 0.01);
  near("pre-trend Wald", sidecar_value(dir / "pretrend.json", "Wald", "Statistic"), 3.090, 0.05);
  const double df = sidecar_value(dir / "pretrend.json", "Wald", "df");
  if (df != 5.0) misses.push_back("pre-trend df " + fmt("%.0f", df));
  std::string detail = misses.empty() ? "all replication targets within tolerance" : "";
  for (const auto& m : misses) detail += (detail.empty() ? "" : "; ") + m;
  return {misses.empty(), detail};
}

Outcome determinism() {
  const fs::path golden = fs::path(DRIFT_TEST_FIXTURES) / "golden";
  drift::testing::TempDir a("accept-a"), b("accept-b");
  std::map<std::string, std::string> bundles[2];
  std::string hashes[2];
  int i = 0;
  for (const auto* dir : {&a, &b}) {
    for (const auto& e : fs::directory_iterator(golden)) fs::copy_file(e.path(), dir->path() / e.path().filename());
    const auto cfg = pipeline::load_config(dir->path() / "config.json", {"output_dir=out", "threads=" + std::to_string(1 + 3 * i)});
    hashes[i] = pipeline::run(cfg, "all").provenance_hash;
    for (const auto& e : fs::recursive_directory_iterator(cfg.output_dir)) {
      if (e.is_regular_file()) bundles[i][fs::relative(e.path(), cfg.output_dir).string()] = drift::testing::read_text(e.path());
    }
    ++i;
  }
  const bool same = bundles[0] == bundles[1] && hashes[0] == hashes[1] && !bundles[0].empty();
  return {same, std::to_string(bundles[0].size()) + " files, bundles " + (same ? "byte-identical" : "differ") +
                    " (1 vs 4 threads), provenance " + hashes[0].substr(0, 12)};
}

}  // namespace

int main() {
  report("Distance oracles", distances);
  report("Whitening", whitening);
  report("HAC correctness", hac);
  report("Synthetic DGP recovery", dgp_recovery);
  report("LP consistency", lp_consistency);
  report("Gating", gating);
  report("Conditional replication", replication);
  report("Determinism", determinism);
  return failures == 0 ? 0 : 1;
}
