#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "drift/ingest/buckets.hpp"
#include "drift/novelty/daily.hpp"
#include "drift/novelty/distances.hpp"
#include "drift/novelty/whitening.hpp"
#include "test_support.hpp"

using namespace drift;
using namespace drift::novelty;
using Catch::Approx;
using Catch::Matchers::ContainsSubstring;

namespace {

// Brute-force references: explicit loops over every ordered pair, no shared
// code with the library's unordered-pair accumulation. `self_pairs` selects
// the all-n^2 (V) average or the distinct-pair (U) average.
double dist(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) s += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
  return std::sqrt(s);
}

template <class K>
double oracle_within(const Eigen::MatrixXd& s, double singleton, K k, bool self_pairs) {
  if (s.rows() < 2) return singleton;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    for (Eigen::Index j = 0; j < s.rows(); ++j) {
      if (i != j || self_pairs) acc += k(dist(s, i, s, j));
    }
  }
  const auto n = static_cast<double>(s.rows());
  return acc / (self_pairs ? n * n : n * (n - 1));
}

template <class K>
double oracle_cross(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, K k) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) acc += k(dist(a, i, b, j));
  }
  return acc / static_cast<double>(a.rows() * b.rows());
}

double oracle_energy(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool self_pairs = true) {
  auto id = [](double d) { return d; };
  return 2.0 * oracle_cross(a, b, id) - oracle_within(a, 0.0, id, self_pairs) - oracle_within(b, 0.0, id, self_pairs);
}

double oracle_median(const Eigen::MatrixXd& pooled) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) d.push_back(dist(pooled, i, pooled, j));
  }
  std::sort(d.begin(), d.end());
  const auto n = d.size();
  return n % 2 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

double oracle_mmd2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, bool self_pairs = true) {
  Eigen::MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  const double m = oracle_median(pooled);
  const double gamma = 1.0 / (2.0 * m * m);
  auto k = [gamma](double d) { return std::exp(-gamma * d * d); };
  return oracle_within(a, 1.0, k, self_pairs) + oracle_within(b, 1.0, k, self_pairs) - 2.0 * oracle_cross(a, b, k);
}

Eigen::MatrixXd random_sample(std::mt19937_64& rng, Eigen::Index n, Eigen::Index dim) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(n, dim);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

Eigen::MatrixXd points(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

}  // namespace

TEST_CASE("energy_distance", "[novelty]") {
  const auto x = points({{0.6, 0.8}});
  const auto y = points({{1.0, 0.0}});
  CHECK(energy_distance(x, x) == 0.0);
  const double d = (x - y).norm();
  CHECK(energy_distance(x, y) == Approx(2.0 * d).epsilon(1e-15));

  // Enumerated by hand: cross pairs {0, sqrt2}; within A ordered pairs
  // {0, sqrt2, sqrt2, 0}; within B {0}. V: 2(sqrt2/2) - sqrt2/2 - 0 = sqrt2/2.
  // U drops self-pairs: 2(sqrt2/2) - sqrt2 - 0 = 0.
  const auto a = points({{1, 0}, {0, 1}});
  const auto b = points({{1, 0}});
  CHECK(oracle_energy(a, b) == Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(energy_distance(a, b) == Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(oracle_energy(a, b, false) == Approx(0.0).margin(1e-15));
  CHECK(energy_distance(a, b, Estimator::u_statistic) == Approx(0.0).margin(1e-15));

  // Identical two-point samples: V vanishes, U goes negative (-|x-y|).
  const auto pair = points({{0, 0}, {3, 4}});
  CHECK(std::abs(energy_distance(pair, pair)) <= 1e-12);
  CHECK(energy_distance(pair, pair, Estimator::u_statistic) == Approx(-5.0).epsilon(1e-15));

  REQUIRE_THROWS_WITH(energy_distance(Eigen::MatrixXd(0, 2), b), ContainsSubstring("empty sample"));
  REQUIRE_THROWS(energy_distance(points({{1, 0, 0}}), b));
}

TEST_CASE("median heuristic", "[novelty]") {
  CHECK(median_heuristic_gamma(points({{0, 0}, {2, 0}})) == 0.125);
  CHECK(median_pairwise_distance(points({{0}, {1}, {2}})) == 1.0);
  CHECK(median_heuristic_gamma(points({{0}, {1}, {2}})) == 0.5);
  CHECK(median_pairwise_distance(points({{0, 0}, {0, 0}, {1, 0}})) == 1.0);
  CHECK(median_heuristic_gamma(points({{0, 0}, {0, 0}, {1, 0}})) == 0.5);
  // four points: six distances {1,1,1,1,sqrt2,sqrt2}; even count averages the middle pair
  CHECK(median_pairwise_distance(points({{0, 0}, {1, 0}, {0, 1}, {1, 1}})) == 1.0);
  // distances {1,2,3,4,6,7}
  CHECK(median_pairwise_distance(points({{0}, {1}, {3}, {7}})) == 3.5);
  REQUIRE_THROWS_WITH(median_heuristic_gamma(points({{1, 1}, {1, 1}})), ContainsSubstring("degenerate bandwidth"));
  CHECK(gamma_from_median(2.0, GammaRule::inverse_m2) == 0.25);
}

TEST_CASE("mmd2", "[novelty]") {
  std::mt19937_64 rng(21);
  SECTION("identical multisets cancel") {
    const auto a = random_sample(rng, 5, 4);
    CHECK(std::abs(mmd2(a, a)) <= 1e-12);
  }
  SECTION("singletons have a closed form") {
    const auto x = points({{0, 0}});
    const auto y = points({{3, 4}});
    const double gamma = 0.01;
    CHECK(mmd2(x, y, gamma) == Approx(2.0 - 2.0 * std::exp(-gamma * 25.0)).epsilon(1e-14));
    // with the median heuristic the single pair sets m = d, so gamma d^2 = 1/2
    CHECK(mmd2(x, y) == Approx(2.0 - 2.0 * std::exp(-0.5)).epsilon(1e-14));
  }
  SECTION("3 vs 2 points equals direct kernel sums") {
    const auto a = random_sample(rng, 3, 3);
    const auto b = random_sample(rng, 2, 3);
    CHECK(std::abs(mmd2(a, b) - oracle_mmd2(a, b)) <= 1e-12);
    CHECK(std::abs(mmd2(a, b, GammaRule::inverse_two_m2, Estimator::u_statistic) - oracle_mmd2(a, b, false)) <= 1e-12);
  }
  SECTION("grows with separation for fixed gamma") {
    const auto x = points({{0.0}});
    double prev = -1.0;
    for (double d = 0.1; d < 5.0; d += 0.1) {
      const double v = mmd2(x, points({{d}}), 0.3);
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("distance properties on random small samples", "[novelty][property]") {
  std::mt19937_64 rng(1234);
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_int_distribution<int> dims(1, 8);
  for (int trial = 0; trial < 300; ++trial) {
    const int dim = dims(rng);
    const auto a = random_sample(rng, size(rng), dim);
    const auto b = random_sample(rng, size(rng), dim);
    const double e_ab = energy_distance(a, b);
    CHECK(std::abs(e_ab - oracle_energy(a, b)) <= 1e-12);
    CHECK(std::abs(e_ab - energy_distance(b, a)) <= 1e-12);
    CHECK(e_ab >= -1e-12);
    const double m_ab = mmd2(a, b);
    CHECK(std::abs(m_ab - oracle_mmd2(a, b)) <= 1e-12);
    CHECK(std::abs(m_ab - mmd2(b, a)) <= 1e-12);
    CHECK(std::abs(energy_distance(a, a)) <= 1e-12);
    if (a.rows() > 1) CHECK(std::abs(mmd2(a, a)) <= 1e-12);
    CHECK(m_ab >= -1e-12);
    CHECK(std::abs(energy_distance(a, b, Estimator::u_statistic) - oracle_energy(a, b, false)) <= 1e-12);
  }
}

TEST_CASE("energy distance scales linearly for singletons", "[novelty][property]") {
  const auto x = points({{0.0, 0.0}});
  for (double d : {0.5, 1.0, 2.0, 7.5}) CHECK(energy_distance(x, points({{d, 0.0}})) == Approx(2.0 * d).epsilon(1e-15));
}

TEST_CASE("fit_whitener", "[novelty]") {
  SECTION("square corners become identity-covariance") {
    const auto x = points({{0, 0}, {2, 0}, {0, 2}, {2, 2}});
    const auto model = fit_whitener({x, Stage::raw});
    const auto w = apply_whitener(model, x);
    CHECK(w.stage == Stage::whitened);
    const Eigen::MatrixXd cov = sample_covariance(w.values);
    CHECK((cov - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(w.values.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("constant column is dropped") {
    std::mt19937_64 rng(2);
    Eigen::MatrixXd x = random_sample(rng, 50, 5);
    x.col(3).setConstant(4.2);
    const auto model = fit_whitener({x, Stage::raw});
    CHECK(model.components() == 4);
    const auto w = apply_whitener(model, x);
    CHECK((sample_covariance(w.values) - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-9);
  }
  SECTION("mean vector maps to zero and held-out output is reproducible") {
    std::mt19937_64 rng(3);
    const Eigen::MatrixXd x = random_sample(rng, 80, 6) * 3.0;
    const auto m1 = fit_whitener({x, Stage::raw});
    const auto m2 = fit_whitener({x, Stage::raw});
    CHECK(apply_whitener(m1, m1.mean.transpose()).values.cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::MatrixXd held = random_sample(rng, 1, 6);
    const auto o1 = apply_whitener(m1, held).values;
    const auto o2 = apply_whitener(m2, held).values;
    CHECK(o1 == o2);
  }
  SECTION("errors") {
    REQUIRE_THROWS_WITH(fit_whitener({Eigen::MatrixXd::Ones(5, 3), Stage::raw}), ContainsSubstring("rank 0"));
    REQUIRE_THROWS(fit_whitener({Eigen::MatrixXd::Ones(1, 3), Stage::raw}));
    const auto model = fit_whitener({points({{0, 0}, {2, 0}, {0, 2}, {2, 2}}), Stage::raw});
    REQUIRE_THROWS_WITH(apply_whitener(model, Eigen::MatrixXd::Zero(1, 3)), ContainsSubstring("dimension mismatch"));
  }
}

TEST_CASE("unit_normalize", "[novelty]") {
  const auto u = unit_normalize(points({{3, 4}, {0.6, 0.8}}));
  CHECK(u.stage == Stage::unit);
  CHECK(u.values(0, 0) == Approx(0.6).epsilon(1e-15));
  CHECK(u.values(0, 1) == Approx(0.8).epsilon(1e-15));
  CHECK(std::abs(u.values(1, 0) - 0.6) < 1e-12);
  REQUIRE_THROWS_WITH(unit_normalize(points({{1, 1}, {0, 0}})), ContainsSubstring("row 1"));
}

namespace {

struct Corpus {
  std::vector<ingest::DailyBucket> buckets;
  EmbeddingMatrix embeddings;
};

/// Buckets with the given per-day counts; points drawn around `centre(t)`.
template <class Centre>
Corpus make_corpus(const std::vector<std::size_t>& counts, Eigen::Index dim, std::uint64_t seed, Centre centre) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Corpus c;
  std::size_t total = 0;
  for (auto n : counts) total += n;
  c.embeddings.values.resize(static_cast<Eigen::Index>(total), dim);
  c.embeddings.stage = Stage::unit;
  std::size_t row = 0;
  const Date start = parse_date("2025-03-01");
  for (std::size_t t = 0; t < counts.size(); ++t) {
    ingest::DailyBucket b{start + static_cast<long>(t), counts[t], {}};
    for (std::size_t i = 0; i < counts[t]; ++i) {
      for (Eigen::Index j = 0; j < dim; ++j) c.embeddings.values(static_cast<Eigen::Index>(row), j) = centre(t, j) + nd(rng);
      b.embedding_rows.push_back(row++);
    }
    c.buckets.push_back(std::move(b));
  }
  return c;
}

}  // namespace

TEST_CASE("daily_novelty gating", "[novelty]") {
  const std::vector<std::size_t> counts{5, 5, 0, 2, 4, 3, 1, 6, 0, 7, 3};
  auto corpus = make_corpus(counts, 3, 4, [](std::size_t, Eigen::Index) { return 0.0; });
  NoveltyConfig cfg;  // energy, W=7, >=3 day posts, >=10 reference posts
  const auto s = daily_novelty(corpus.buckets, corpus.embeddings, cfg);
  std::size_t gated = 0;
  for (std::size_t t = 0; t < counts.size(); ++t) {
    std::size_t ref = 0;
    for (std::size_t k = 1; k <= 7 && k <= t; ++k) ref += counts[t - k];
    const Gate expect = counts[t] == 0 ? Gate::zero_post : (counts[t] < 3 || ref < 10) ? Gate::low_sample : Gate::ok;
    CHECK(s.ref_posts[t] == ref);
    CHECK(s.gate[t] == expect);
    CHECK(is_missing(s.value[t]) == (expect != Gate::ok));
    if (expect != Gate::ok) ++gated;
    if (!is_missing(s.value[t])) CHECK(s.value[t] >= 0.0);
  }
  CHECK(s.gate[3] == Gate::low_sample);  // two posts
  CHECK(s.gate[2] == Gate::zero_post);
  CHECK(gated == static_cast<std::size_t>(std::count_if(s.gate.begin(), s.gate.end(), [](Gate g) { return g != Gate::ok; })));
}

TEST_CASE("daily_novelty separates a shifted day", "[novelty]") {
  // day 9 repeats the reference distribution; day 10 is a far cluster
  const std::vector<std::size_t> counts(11, 12);
  for (auto metric : {Metric::energy, Metric::mmd2}) {
    auto corpus = make_corpus(counts, 4, 8, [](std::size_t t, Eigen::Index) { return t == 10 ? 6.0 : 0.0; });
    auto cfg = NoveltyConfig::defaults_for(metric);
    const auto s = daily_novelty(corpus.buckets, corpus.embeddings, cfg);
    REQUIRE(s.gate[9] == Gate::ok);
    REQUIRE(s.gate[10] == Gate::ok);
    CHECK(s.value[10] > 10.0 * std::abs(s.value[9]));
    if (metric == Metric::energy) CHECK(s.value[10] > 5.0);
    CHECK(s.value[9] < 0.5);
  }
}

TEST_CASE("daily_novelty is deterministic across thread counts", "[novelty]") {
  std::vector<std::size_t> counts;
  for (int t = 0; t < 40; ++t) counts.push_back(static_cast<std::size_t>(3 + (t * 7) % 9));
  auto corpus = make_corpus(counts, 6, 17, [](std::size_t t, Eigen::Index j) { return 0.1 * static_cast<double>((t + static_cast<std::size_t>(j)) % 5); });
  for (auto metric : {Metric::energy, Metric::mmd2}) {
    const auto cfg = NoveltyConfig::defaults_for(metric);
    const auto one = daily_novelty(corpus.buckets, corpus.embeddings, cfg, 1);
    for (unsigned threads : {2u, 3u, 8u}) {
      const auto many = daily_novelty(corpus.buckets, corpus.embeddings, cfg, threads);
      REQUIRE(many.value.size() == one.value.size());
      for (std::size_t t = 0; t < one.value.size(); ++t) {
        if (is_missing(one.value[t])) {
          CHECK(is_missing(many.value[t]));
        } else {
          CHECK(std::memcmp(&one.value[t], &many.value[t], sizeof(double)) == 0);
        }
      }
    }
  }
}

TEST_CASE("daily mmd2 with coincident points", "[novelty]") {
  std::vector<std::size_t> counts{10, 4};
  Corpus c = make_corpus(counts, 2, 1, [](std::size_t, Eigen::Index) { return 0.0; });
  c.embeddings.values.setConstant(0.5);
  auto cfg = NoveltyConfig::defaults_for(Metric::mmd2);
  const auto s = daily_novelty(c.buckets, c.embeddings, cfg);
  REQUIRE(s.gate[1] == Gate::ok);
  CHECK(s.value[1] == 0.0);
}

TEST_CASE("standardize_novelty", "[novelty]") {
  NoveltySeries s;
  s.dates = {parse_date("2025-01-01"), parse_date("2025-01-02"), parse_date("2025-01-03")};
  s.value = {0.01, kMissing, 0.03};
  s.day_posts = {3, 0, 3};
  s.ref_posts = {10, 10, 10};
  s.gate = {Gate::ok, Gate::zero_post, Gate::ok};
  const auto z = standardize_novelty(s);
  CHECK(z.z[0] == Approx(-std::sqrt(0.5)).epsilon(1e-12));
  CHECK(is_missing(z.z[1]));
  CHECK(z.z[2] == Approx(std::sqrt(0.5)).epsilon(1e-12));
  s.value = {0.02, kMissing, 0.02};
  REQUIRE_THROWS_WITH(standardize_novelty(s), ContainsSubstring("degenerate"));
}
