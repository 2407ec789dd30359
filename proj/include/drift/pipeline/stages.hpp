#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "drift/common.hpp"
#include "drift/econometrics/models.hpp"
#include "drift/econometrics/stationarity.hpp"
#include "drift/hash.hpp"
#include "drift/ingest/buckets.hpp"
#include "drift/ingest/controls.hpp"
#include "drift/ingest/embedding_file.hpp"
#include "drift/ingest/exposure.hpp"
#include "drift/ingest/posts.hpp"
#include "drift/novelty/daily.hpp"
#include "drift/novelty/whitening.hpp"
#include "drift/pipeline/config.hpp"
#include "drift/pipeline/output.hpp"

namespace drift::pipeline {

namespace em = drift::econometrics;

inline const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = {"validate", "novelty", "main-table", "leads", "falsify",
                                                 "exposures", "irf", "diagnostics", "all"};
  return names;
}

/// Everything loaded for one run, read lazily so a stage touches only the
/// files it needs. Every file read goes through `ledger`.
class Context {
 public:
  explicit Context(const RunConfig& cfg) : cfg_(cfg), tz_(ingest::Timezone::load(cfg.timezone)) {}

  const RunConfig& config() const { return cfg_; }
  InputLedger& ledger() { return ledger_; }
  std::vector<std::string>& warnings() { return warnings_; }

  struct Corpus {
    std::vector<ingest::PostRecord> posts;
    std::vector<ingest::DailyBucket> buckets;
    novelty::EmbeddingMatrix embeddings;  // stage unit
    std::size_t raw_dim = 0;
    std::size_t components = 0;
    std::string corpus_hash;
    std::string model;
  };

  const Corpus& corpus() {
    if (corpus_) return *corpus_;
    Corpus c;
    c.posts = ingest::load_posts(cfg_.posts, tz_);
    ledger_.record("posts", cfg_.posts);
    if (c.posts.empty()) throw Error("posts file '" + cfg_.posts.string() + "' has no records");
    const auto file = ingest::read_embedding_file(cfg_.embeddings);
    ledger_.record("embeddings", cfg_.embeddings);
    const auto posts_hash = sha256_file(cfg_.posts);
    if (file.corpus_hash != posts_hash) {
      warnings_.push_back("embedding header hash " + file.corpus_hash + " does not match the posts file");
    }
    ingest::join_embeddings(c.posts, file);
    c.buckets = ingest::bucket_daily(c.posts, tz_);
    c.raw_dim = file.dim();
    c.corpus_hash = file.corpus_hash;
    c.model = file.model;
    Eigen::MatrixXd values = file.values;
    if (cfg_.whiten) {
      const auto model = novelty::fit_whitener(novelty::EmbeddingMatrix{values, novelty::Stage::raw});
      c.components = static_cast<std::size_t>(model.components());
      values = novelty::apply_whitener(model, values).values;
    } else {
      c.components = file.dim();
    }
    c.embeddings = novelty::unit_normalize(values);
    corpus_ = std::move(c);
    return *corpus_;
  }

  std::vector<Date> index() { return ingest::bucket_dates(corpus().buckets); }

  const novelty::NoveltySeries& novelty_series(const novelty::NoveltyConfig& nc) {
    const auto key = novelty::to_string(nc.metric);
    auto it = novelty_.find(key);
    if (it != novelty_.end()) return it->second;
    const auto& c = corpus();
    auto s = novelty::standardize_novelty(novelty::daily_novelty(c.buckets, c.embeddings, nc, cfg_.threads));
    return novelty_.emplace(key, std::move(s)).first->second;
  }

  /// Outcome Y = N_tz for a novelty metric.
  const Series& outcome(const novelty::NoveltyConfig& nc) { return novelty_series(nc).z; }

  const ingest::ControlMatrix& controls() {
    if (!controls_) controls_ = ingest::calendar_controls(index(), cfg_.inauguration, ingest::bucket_counts(corpus().buckets));
    return *controls_;
  }

  const std::vector<ingest::TranscriptDay>& transcript(const std::string& role, const std::filesystem::path& path) {
    auto it = transcripts_.find(role);
    if (it != transcripts_.end()) return it->second;
    auto days = ingest::load_transcripts(path);
    ledger_.record(role, path);
    return transcripts_.emplace(role, std::move(days)).first->second;
  }

  /// Raw exposure values on their own dates.
  const ingest::ExposureSeries& raw_exposure(const std::string& name) {
    auto it = raw_.find(name);
    if (it != raw_.end()) return it->second;
    const auto& src = cfg_.exposure(name);
    ingest::ExposureSeries s;
    if (src.kind == "density") {
      s = ingest::transcript_density(transcript("exposure:" + name, src.path), name);
    } else if (src.kind == "mentions") {
      s = ingest::transcript_mentions(transcript("exposure:" + name, src.path), name);
    } else if (src.kind == "external") {
      s = ingest::load_external_series(src.path, name);
      ledger_.record("exposure:" + name, src.path);
    } else {
      std::vector<ingest::ExposureSeries> parts;
      for (const auto& comp : src.components) parts.push_back(raw_exposure(comp));
      s = ingest::mean_of(parts, name);
    }
    for (const auto& w : s.warnings) warnings_.push_back(w);
    return raw_.emplace(name, std::move(s)).first->second;
  }

  /// E_z on the analysis index.
  const ingest::ExposureSeries& exposure(const std::string& name) {
    auto it = aligned_.find(name);
    if (it != aligned_.end()) return it->second;
    auto s = ingest::align_and_standardize(raw_exposure(name), index());
    return aligned_.emplace(name, std::move(s)).first->second;
  }

 private:
  const RunConfig& cfg_;
  ingest::Timezone tz_;
  InputLedger ledger_;
  std::vector<std::string> warnings_;
  std::optional<Corpus> corpus_;
  std::map<std::string, novelty::NoveltySeries> novelty_;
  std::optional<ingest::ControlMatrix> controls_;
  std::map<std::string, std::vector<ingest::TranscriptDay>> transcripts_;
  std::map<std::string, ingest::ExposureSeries> raw_;
  std::map<std::string, ingest::ExposureSeries> aligned_;
};

/// A stage output before provenance is attached: a published table, a JSON
/// document or a CSV data file body.
struct Artifact {
  std::string name;
  std::variant<Table, json, std::string> body;
};

using Artifacts = std::vector<Artifact>;

namespace detail {

inline std::string spec_id(const novelty::NoveltyConfig& nc, const std::string& exposure, const em::RegressionSpec& s) {
  std::string id = novelty::to_string(nc.metric) + "." + exposure + ".q" + std::to_string(s.q);
  if (s.leads > 0) id += ".L" + std::to_string(s.leads);
  return id;
}

inline std::string sample_label(const std::vector<Date>& index, const em::Design& d) {
  if (d.rows.empty()) return {};
  return format_date(index[d.rows.front()]) + "--" + format_date(index[d.rows.back()]);
}

inline json test_json(const em::LinearComboTest& t) {
  return json{{"estimate", t.estimate}, {"se", t.se}, {"t", t.t}, {"p", t.p}};
}

inline json spec_json(const em::RegressionSpec& s) {
  return json{{"p", s.p},
              {"q", s.q},
              {"leads", s.leads},
              {"hac_bandwidth", s.hac_bandwidth},
              {"controls", s.controls},
              {"include_trend", s.include_trend},
              {"sample_start", s.sample_start ? json(format_date(*s.sample_start)) : json(nullptr)},
              {"sample_end", s.sample_end ? json(format_date(*s.sample_end)) : json(nullptr)},
              {"hac_small_sample_correction", false}};
}

inline json regression_json(const std::string& id, const std::string& outcome, const std::string& exposure,
                            const em::ArdlFit& f, const std::vector<Date>& index) {
  json lower = json::array();
  for (Eigen::Index i = 0; i < f.result.hac_cov.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j <= i; ++j) row.push_back(f.result.hac_cov(i, j));
    lower.push_back(std::move(row));
  }
  std::vector<double> coef(f.result.coef.data(), f.result.coef.data() + f.result.coef.size());
  json j{{"spec_id", id},
         {"outcome", outcome},
         {"exposure", exposure},
         {"spec", spec_json(f.spec)},
         {"labels", f.result.labels},
         {"coefficients", coef},
         {"hac_cov_lower", lower},
         {"beta_sum", test_json(f.beta_sum)},
         {"n", f.result.n},
         {"r2", f.result.r2},
         {"sample", sample_label(index, f.design)},
         {"dropped_controls", f.design.dropped_controls}};
  j["delta_sum"] = f.delta_sum ? test_json(*f.delta_sum) : json(nullptr);
  return j;
}

inline std::string window_label(int from, int to) { return std::to_string(from) + ":" + std::to_string(to); }

inline std::string novelty_csv(const novelty::NoveltySeries& s) {
  std::ostringstream out;
  novelty::write_novelty_csv(out, s);
  return out.str();
}

/// Fits one ARDL and records its regression file.
inline em::ArdlFit fit_and_record(Context& ctx, Artifacts& out, const novelty::NoveltyConfig& nc,
                                  const std::string& exposure, const em::RegressionSpec& spec, std::string* id_out = nullptr) {
  const auto& Y = ctx.outcome(nc);
  const auto& E = ctx.exposure(exposure).z;
  const auto id = spec_id(nc, exposure, spec);
  em::ArdlFit f;
  try {
    f = em::fit_ardl(Y, E, ctx.controls(), spec);
  } catch (const Error& e) {
    throw Error(id + ": " + e.what());
  }
  out.push_back({"regressions/" + id + ".json", regression_json(id, novelty::to_string(nc.metric), exposure, f, ctx.index())});
  if (id_out) *id_out = id;
  return f;
}

inline std::vector<std::string> ardl_columns(bool with_sample) {
  if (with_sample) return {"Spec", "beta_sum", "HAC s.e.", "p_HAC", "Sample", "n", "R2"};
  return {"Spec", "beta_sum", "HAC s.e.", "p_HAC", "n", "R2"};
}

inline std::vector<Table::Cell> ardl_row(const std::string& label, const em::LinearComboTest& t, const em::ArdlFit& f,
                                         const std::string& id, const std::string& stat, const std::string* sample) {
  std::vector<Table::Cell> row{Table::text(label), Table::number(t.estimate, id, stat), Table::number(t.se, id, stat + ".se"),
                               Table::pvalue(t.p, id, stat + ".p")};
  if (sample) row.push_back(Table::text(*sample));
  row.push_back(Table::count(f.result.n, id));
  row.push_back(Table::number(f.result.r2, id, "r2"));
  return row;
}

}  // namespace detail

// ---------------------------------------------------------------- stages

inline Artifacts stage_validate(Context& ctx) {
  const auto& cfg = ctx.config();
  const auto& c = ctx.corpus();
  json j{{"posts", c.posts.size()},
         {"days", c.buckets.size()},
         {"first_day", format_date(c.buckets.front().date)},
         {"last_day", format_date(c.buckets.back().date)},
         {"embedding_dim", c.raw_dim},
         {"whitened_components", c.components}};
  json exposures = json::object();
  for (const auto& e : cfg.exposures) {
    const auto& s = ctx.raw_exposure(e.name);
    exposures[e.name] = {{"days", s.dates.size()},
                         {"coverage_start", s.dates.empty() ? json(nullptr) : json(format_date(s.coverage_start))},
                         {"coverage_end", s.dates.empty() ? json(nullptr) : json(format_date(s.coverage_end))}};
  }
  j["exposures"] = exposures;
  return {{"validation.json", j}};
}

inline Artifacts stage_novelty(Context& ctx) {
  Artifacts out;
  const auto& c = ctx.corpus();
  for (const auto& nc : ctx.config().novelty) {
    out.push_back({"novelty_" + novelty::to_string(nc.metric) + ".csv", detail::novelty_csv(ctx.novelty_series(nc))});
  }
  out.push_back({"embeddings.json",
                 json{{"posts", c.posts.size()},
                      {"dim", c.raw_dim},
                      {"whiten", ctx.config().whiten},
                      {"components", c.components},
                      {"model", c.model},
                      {"corpus_hash", c.corpus_hash}}});
  return out;
}

/// Main-table layout for every novelty metric (q grid plus the leads row), the
/// spec grid with sample windows, and per-lag coefficients of the primary
/// model.
inline Artifacts stage_main_table(Context& ctx) {
  const auto& cfg = ctx.config();
  Artifacts out;
  for (std::size_t m = 0; m < cfg.novelty.size(); ++m) {
    const auto& nc = cfg.novelty[m];
    Table main(detail::ardl_columns(false));
    Table grid(detail::ardl_columns(true));
    for (const auto& spec : cfg.spec_grid()) {
      std::string id;
      const auto f = detail::fit_and_record(ctx, out, nc, cfg.primary_exposure, spec, &id);
      const auto label = "q=" + std::to_string(spec.q);
      const auto sample = detail::sample_label(ctx.index(), f.design);
      main.add_row(detail::ardl_row(label, f.beta_sum, f, id, "beta_sum", nullptr));
      grid.add_row(detail::ardl_row(label, f.beta_sum, f, id, "beta_sum", &sample));
    }
    std::string lead_id;
    const auto lf = detail::fit_and_record(ctx, out, nc, cfg.primary_exposure, cfg.spec_for(cfg.primary_q, cfg.leads), &lead_id);
    main.add_row(detail::ardl_row("Leads sum (L=" + std::to_string(cfg.leads) + ")", *lf.delta_sum, lf, lead_id, "delta_sum", nullptr));
    const auto suffix = m == 0 ? std::string() : "_" + novelty::to_string(nc.metric);
    out.push_back({"table_main" + suffix, std::move(main)});
    out.push_back({"spec_grid" + suffix, std::move(grid)});
    if (m != 0) continue;

    std::string id;
    const auto f = detail::fit_and_record(ctx, out, nc, cfg.primary_exposure, cfg.spec_for(cfg.primary_q, 0), &id);
    std::string body = "lag,coef,se,lo95,hi95\n";
    for (int j = 0; j <= cfg.primary_q; ++j) {
      const auto t = em::sum_test(f.result, {em::e_lag_label(j)});
      body += std::to_string(j) + "," + fmt_full(t.estimate) + "," + fmt_full(t.se) + "," + fmt_full(t.estimate - 1.959963984540054 * t.se) +
              "," + fmt_full(t.estimate + 1.959963984540054 * t.se) + "\n";
    }
    out.push_back({"perlag.csv", body});
  }
  return out;
}

/// Timing placebo: the sum of L exposure leads on top of the primary q, per
/// novelty metric.
inline Artifacts stage_leads(Context& ctx) {
  const auto& cfg = ctx.config();
  Artifacts out;
  Table t({"Spec", "delta_sum", "HAC s.e.", "p_HAC", "Sample", "n", "R2"});
  const auto& label = cfg.exposure(cfg.primary_exposure).label;
  for (const auto& nc : cfg.novelty) {
    std::string id;
    const auto f = detail::fit_and_record(ctx, out, nc, cfg.primary_exposure, cfg.spec_for(cfg.primary_q, cfg.leads), &id);
    const auto sample = detail::sample_label(ctx.index(), f.design);
    const auto row_label = novelty::to_string(nc.metric) + " novelty, " + label + " (q=" + std::to_string(cfg.primary_q) + ")";
    t.add_row(detail::ardl_row(row_label, *f.delta_sum, f, id, "delta_sum", &sample));
  }
  out.push_back({"table_leads", std::move(t)});
  return out;
}

/// Share of seeded shuffles of `E` whose beta_sum is significant at 5%.
inline double shuffled_placebo_rate(const Series& Y, const Series& E, const ingest::ControlMatrix& controls,
                                    const em::RegressionSpec& spec, std::uint64_t seed, int draws) {
  if (draws < 1) throw Error("placebo shuffle needs at least one draw");
  std::mt19937_64 rng(seed);
  int rejections = 0;
  Series shuffled = E;
  for (int d = 0; d < draws; ++d) {
    shuffled = E;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    rejections += em::fit_ardl(Y, shuffled, controls, spec).beta_sum.p < 0.05;
  }
  return static_cast<double>(rejections) / draws;
}

/// Primary model with each placebo keyword's density in place of the
/// primary exposure. Missing keyword files are listed as skipped.
inline Artifacts stage_falsify(Context& ctx) {
  const auto& cfg = ctx.config();
  const auto& nc = cfg.outcome();
  Artifacts out;
  Table t({"Keyword", "beta_sum", "HAC s.e.", "p_HAC", "n", "Status"});
  const auto spec = cfg.spec_for(cfg.primary_q, 0);
  for (const auto& p : cfg.falsification) {
    if (!std::filesystem::is_regular_file(p.path)) {
      ctx.warnings().push_back("falsification keyword '" + p.name + "' skipped: file not found");
      t.add_row({Table::text(p.label), Table::text(""), Table::text(""), Table::text(""), Table::text(""),
                 Table::text("skipped: file not found")});
      continue;
    }
    const auto raw = ingest::transcript_density(ctx.transcript("placebo:" + p.name, p.path), p.name);
    const auto E = ingest::align_and_standardize(raw, ctx.index()).z;
    const auto id = novelty::to_string(nc.metric) + ".placebo_" + p.name + ".q" + std::to_string(spec.q);
    em::ArdlFit f;
    try {
      f = em::fit_ardl(ctx.outcome(nc), E, ctx.controls(), spec);
    } catch (const Error& e) {
      throw Error(id + ": " + e.what());
    }
    out.push_back({"regressions/" + id + ".json", detail::regression_json(id, novelty::to_string(nc.metric), "placebo:" + p.name, f, ctx.index())});
    t.add_row({Table::text(p.label), Table::number(f.beta_sum.estimate, id, "beta_sum"), Table::number(f.beta_sum.se, id, "beta_sum.se"),
               Table::pvalue(f.beta_sum.p, id, "beta_sum.p"), Table::count(f.result.n, id), Table::text("ok")});
  }
  out.push_back({"table_falsification", std::move(t)});
  if (cfg.placebo_shuffles > 0) {
    const double rate = shuffled_placebo_rate(ctx.outcome(nc), ctx.exposure(cfg.primary_exposure).z, ctx.controls(), spec,
                                              cfg.seed, cfg.placebo_shuffles);
    out.push_back({"placebo_shuffle.json", json{{"draws", cfg.placebo_shuffles}, {"seed", cfg.seed}, {"rejection_rate_5pct", rate}}});
  }
  return out;
}

/// beta_sum of the primary q for every configured exposure measure, each on
/// its own coverage.
inline Artifacts stage_exposures(Context& ctx) {
  const auto& cfg = ctx.config();
  Artifacts out;
  Table t({"Exposure", "beta_sum", "HAC s.e.", "p_HAC", "Sample", "n", "R2"});
  for (const auto& e : cfg.exposures) {
    std::string id;
    const auto f = detail::fit_and_record(ctx, out, cfg.outcome(), e.name, cfg.spec_for(cfg.primary_q, 0), &id);
    const auto sample = detail::sample_label(ctx.index(), f.design);
    t.add_row(detail::ardl_row(e.label, f.beta_sum, f, id, "beta_sum", &sample));
  }
  out.push_back({"table_exposures", std::move(t)});
  return out;
}

/// Level and cumulative local projections, cumulative windows and the joint
/// pre-trend Wald test for the primary outcome and exposure.
inline Artifacts stage_irf(Context& ctx) {
  const auto& cfg = ctx.config();
  const auto& Y = ctx.outcome(cfg.outcome());
  const auto& E = ctx.exposure(cfg.primary_exposure).z;
  const auto& X = ctx.controls();
  const auto spec = cfg.spec_for(0, 0);
  const auto base_id = novelty::to_string(cfg.outcome().metric) + "." + cfg.primary_exposure;
  Artifacts out;

  const auto irf = em::impulse_response(Y, E, X, spec, cfg.irf_min, cfg.irf_max, cfg.threads);
  const double z = 1.959963984540054;
  std::string body = "h,theta,se,lo95,hi95,n,cum_from,cum_to,cum_theta,cum_se,cum_lo95,cum_hi95,cum_n\n";
  for (std::size_t i = 0; i < irf.horizons.size(); ++i) {
    const auto& l = irf.level[i].test;
    const auto& c = irf.cumulative[i].test;
    body += std::to_string(irf.horizons[i]) + "," + fmt_full(l.estimate) + "," + fmt_full(l.se) + "," + fmt_full(l.estimate - z * l.se) +
            "," + fmt_full(l.estimate + z * l.se) + "," + std::to_string(irf.level[i].n) + "," + std::to_string(irf.cumulative[i].from) +
            "," + std::to_string(irf.cumulative[i].to) + "," + fmt_full(c.estimate) + "," + fmt_full(c.se) + "," +
            fmt_full(c.estimate - z * c.se) + "," + fmt_full(c.estimate + z * c.se) + "," + std::to_string(irf.cumulative[i].n) + "\n";
  }
  out.push_back({"irf.csv", body});

  Table windows({"Window", "Estimate", "HAC s.e.", "t", "p_HAC", "Uniform band excl. 0?", "n"});
  for (const auto& w : cfg.lp_windows) {
    const auto est = em::cumulative_lp(Y, E, X, spec, w.from, w.to);
    const auto id = base_id + ".lp" + detail::window_label(w.from, w.to);
    windows.add_row({Table::text(detail::window_label(w.from, w.to)), Table::number(est.test.estimate, id, "theta"),
                     Table::number(est.test.se, id, "theta.se"), Table::number(est.test.t, id, "theta.t"),
                     Table::pvalue(est.test.p, id, "theta.p"), Table::text("--"), Table::count(est.n, id)});
  }
  out.push_back({"lp_windows", std::move(windows)});

  const auto pt = em::joint_pretrend_wald(Y, E, X, spec, cfg.pretrend_leads);
  const auto id = base_id + ".pretrend";
  Table pre({"Test", "Statistic", "df", "p-value", "n", "Notes"});
  pre.add_row({Table::text("Wald H0: no pre-trend"), Table::number(pt.wald.statistic, id, "wald"),
               Table::Cell{std::to_string(pt.wald.df), json(pt.wald.df), id, "df"}, Table::pvalue(pt.wald.p, id, "wald.p"),
               Table::count(pt.n, id), Table::text("")});
  out.push_back({"pretrend", std::move(pre)});
  return out;
}

namespace detail {

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ma = sample_moments(a);
  const auto mb = sample_moments(b);
  if (!(ma.sd > 0.0) || !(mb.sd > 0.0)) return kMissing;
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add((a[i] - ma.mean) * (b[i] - mb.mean));
  return s.value() / (static_cast<double>(a.size() - 1) * ma.sd * mb.sd);
}

inline std::vector<Table::Cell> summary_row(const std::string& name, const std::vector<double>& values, std::size_t total) {
  std::vector<double> v;
  for (double x : values) {
    if (!is_missing(x)) v.push_back(x);
  }
  std::sort(v.begin(), v.end());
  const auto m = sample_moments(v);
  const std::size_t missing = total - v.size();
  const auto id = "summary." + name;
  return {Table::text(name),
          Table::count(v.size(), id),
          Table::number(m.mean, id, "mean"),
          Table::number(m.sd, id, "std"),
          Table::number(v.empty() ? kMissing : v.front(), id, "min"),
          Table::number(sorted_quantile(v, 0.25), id, "p25"),
          Table::number(sorted_quantile(v, 0.5), id, "median"),
          Table::number(sorted_quantile(v, 0.75), id, "p75"),
          Table::number(v.empty() ? kMissing : v.back(), id, "max"),
          Table::Cell{std::to_string(missing), json(missing), id, "missing"},
          Table::number(total ? static_cast<double>(missing) / static_cast<double>(total) : kMissing, id, "missing_pct")};
}

inline json stationarity_json(const Series& s) {
  json j = json::object();
  for (auto det : {em::Deterministic::constant, em::Deterministic::constant_trend}) {
    try {
      const auto r = em::stationarity_report(s, det);
      j[em::to_string(det)] = {{"n", r.n},
                               {"adf", {{"statistic", r.adf.statistic}, {"lags", r.adf.lags}, {"nobs", r.adf.nobs},
                                        {"critical_1_5_10", r.adf.critical}, {"reject_1_5_10", r.adf.reject}}},
                               {"kpss", {{"statistic", r.kpss.statistic}, {"bandwidth", r.kpss.bandwidth},
                                         {"critical_1_5_10", r.kpss.critical}, {"reject_1_5_10", r.kpss.reject}}}};
    } catch (const Error& e) {
      j[em::to_string(det)] = {{"error", e.what()}};
    }
  }
  return j;
}

}  // namespace detail

/// Gating and posting-intensity diagnostics, top novelty days, summary
/// statistics and unit-root diagnostics.
inline Artifacts stage_diagnostics(Context& ctx) {
  const auto& cfg = ctx.config();
  const auto& nc = cfg.outcome();
  const auto& s = ctx.novelty_series(nc);
  const auto& c = ctx.corpus();
  Artifacts out;
  const std::size_t days = s.size();
  std::size_t gated = 0, zero = 0, low_only = 0;
  for (auto g : s.gate) {
    gated += g != novelty::Gate::ok;
    zero += g == novelty::Gate::zero_post;
    low_only += g == novelty::Gate::low_sample;
  }
  std::vector<double> posted;
  for (auto n : s.day_posts) {
    if (n > 0) posted.push_back(static_cast<double>(n));
  }
  std::sort(posted.begin(), posted.end());
  std::vector<double> z_ok, posts_ok;
  for (std::size_t t = 0; t < days; ++t) {
    if (is_missing(s.z[t])) continue;
    z_ok.push_back(s.z[t]);
    posts_ok.push_back(static_cast<double>(s.day_posts[t]));
  }
  const double corr = detail::pearson(z_ok, posts_ok);
  const double missing_share = static_cast<double>(gated) / static_cast<double>(days);
  const auto pid = novelty::to_string(nc.metric) + ".diagnostics";

  Table intensity({"Statistic", "Value"});
  intensity.add_row({Table::text("Days (total)"), Table::count(days, pid)});
  intensity.add_row({Table::text("Missing N_t (days; share)"),
                     Table::Cell{std::to_string(gated) + "; " + fmt3(missing_share), json(missing_share), pid, "missing_share"}});
  intensity.add_row({Table::text("Low-sample days"), Table::Cell{std::to_string(gated), json(gated), pid, "low_sample_days"}});
  intensity.add_row({Table::text("Zero-post days"), Table::Cell{std::to_string(zero), json(zero), pid, "zero_post_days"}});
  const double med = sorted_quantile(posted, 0.5), p10 = sorted_quantile(posted, 0.1), p90 = sorted_quantile(posted, 0.9);
  std::ostringstream ppd;
  ppd << fmt_full(med) << " [" << fmt_full(p10) << ", " << fmt_full(p90) << "]";
  intensity.add_row({Table::text("Posts/day (median [p10, p90])"), Table::Cell{ppd.str(), json{med, p10, p90}, pid, "posts_per_day"}});
  intensity.add_row({Table::text("Corr(N_t, posts)"),
                     Table::Cell{is_missing(corr) ? "degenerate" : fmt3(corr), num_or_null(corr), pid, "corr_posts"}});
  out.push_back({"post_intensity", std::move(intensity)});

  std::vector<std::size_t> order;
  for (std::size_t t = 0; t < days; ++t) {
    if (!is_missing(s.z[t])) order.push_back(t);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.z[a] > s.z[b]; });
  Table top({"Date", "N_tz", "Posts"});
  for (std::size_t i = 0; i < std::min<std::size_t>(5, order.size()); ++i) {
    const auto t = order[i];
    top.add_row({Table::text(format_date(s.dates[t])), Table::number(s.z[t], pid, "N_tz"),
                 Table::Cell{std::to_string(s.day_posts[t]), json(s.day_posts[t]), pid, "posts"}});
  }
  out.push_back({"top_novelty", std::move(top)});

  Table summary({"variable", "count", "mean", "std", "min", "p25", "median", "p75", "max", "missing", "missing pct"});
  summary.add_row(detail::summary_row(novelty::to_string(nc.metric) + " (N_t)", s.value, days));
  summary.add_row(detail::summary_row("n posts", posted, posted.size()));
  const auto& primary = cfg.exposure(cfg.primary_exposure);
  if (primary.kind == "density" || primary.kind == "mentions") {
    const auto& tdays = ctx.transcript("exposure:" + primary.name, primary.path);
    std::vector<double> hits, words, shows, with_hits;
    for (const auto& d : tdays) {
      hits.push_back(static_cast<double>(d.hits));
      words.push_back(static_cast<double>(d.words));
      shows.push_back(static_cast<double>(d.shows));
      with_hits.push_back(static_cast<double>(d.shows_with_hits));
    }
    summary.add_row(detail::summary_row("hits", hits, hits.size()));
    summary.add_row(detail::summary_row("words", words, words.size()));
    summary.add_row(detail::summary_row("shows", shows, shows.size()));
    summary.add_row(detail::summary_row("shows with hits", with_hits, with_hits.size()));
    const auto density = ingest::transcript_density(tdays, primary.name).raw;
    summary.add_row(detail::summary_row("density per 1000", density, density.size()));
  }
  out.push_back({"summary_stats", std::move(summary)});

  json diag{{"metric", novelty::to_string(nc.metric)},
            {"days_total", days},
            {"missing_days", gated},
            {"missing_share", missing_share},
            {"low_sample_days", gated},
            {"low_sample_days_excluding_zero_post", low_only},
            {"zero_post_days", zero},
            {"posts_per_day", {{"median", med}, {"p10", p10}, {"p90", p90}}},
            {"corr_ntz_posts", num_or_null(corr)},
            {"corr_degenerate", is_missing(corr)},
            {"posts", c.posts.size()}};
  diag["stationarity"] = {{"N_tz", detail::stationarity_json(s.z)},
                          {cfg.primary_exposure, detail::stationarity_json(ctx.exposure(cfg.primary_exposure).z)}};
  out.push_back({"diagnostics.json", diag});
  return out;
}

// ---------------------------------------------------------------- runner

struct RunSummary {
  std::string stage;
  std::vector<std::string> files;
  std::string provenance_hash;
  std::vector<std::string> warnings;
};

inline Artifacts run_stage(Context& ctx, const std::string& stage) {
  if (stage == "validate") return stage_validate(ctx);
  if (stage == "novelty") return stage_novelty(ctx);
  if (stage == "main-table") return stage_main_table(ctx);
  if (stage == "leads") return stage_leads(ctx);
  if (stage == "falsify") return stage_falsify(ctx);
  if (stage == "exposures") return stage_exposures(ctx);
  if (stage == "irf") return stage_irf(ctx);
  if (stage == "diagnostics") return stage_diagnostics(ctx);
  throw Error("unknown stage '" + stage + "'");
}

/// Runs one stage (or "all") and writes its bundle. Errors come back tagged
/// with the stage that raised them; on any error nothing is written.
/// `validate` checks inputs and writes nothing.
inline RunSummary run(const RunConfig& cfg, const std::string& stage) {
  const auto& names = stage_names();
  if (std::find(names.begin(), names.end(), stage) == names.end()) throw Error("unknown stage '" + stage + "'", "cli");
  Context ctx(cfg);
  Artifacts artifacts;
  std::vector<std::string> order;
  if (stage == "all") {
    order.assign(names.begin() + 1, names.end() - 1);
  } else {
    order.push_back(stage);
  }
  for (const auto& s : order) {
    try {
      auto a = run_stage(ctx, s);
      if (stage != "validate" && s != "validate") {
        for (auto& x : a) artifacts.push_back(std::move(x));
      }
      if (stage == "validate") {
        for (auto& x : a) artifacts.push_back(std::move(x));
      }
    } catch (const Error& e) {
      throw Error(e.what(), s);
    } catch (const std::exception& e) {
      throw Error(e.what(), s);
    }
  }

  Provenance prov;
  prov.inputs = ctx.ledger().to_json();
  prov.config = cfg.echo;
  prov.stage = stage;
  prov.warnings = ctx.warnings();
  RunSummary summary{stage, {}, prov.hash(), ctx.warnings()};
  if (stage == "validate") return summary;

  try {
    StagedOutput staged(cfg.output_dir);
    for (auto& a : artifacts) {
      if (auto* t = std::get_if<Table>(&a.body)) {
        staged.write_table(a.name, *t, prov);
      } else if (auto* j = std::get_if<json>(&a.body)) {
        json doc = *j;
        doc["provenance"] = prov.to_json();
        staged.write_json(a.name, doc);
      } else {
        staged.write(a.name, prov.csv_line() + std::get<std::string>(a.body));
      }
    }
    staged.write_json("provenance.json", prov.to_json());
    summary.files = staged.files();
    staged.commit();
  } catch (const std::exception& e) {
    throw Error(std::string("writing outputs: ") + e.what(), stage);
  }
  std::sort(summary.files.begin(), summary.files.end());
  return summary;
}

}  // namespace drift::pipeline
