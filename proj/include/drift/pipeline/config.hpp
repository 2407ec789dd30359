#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "drift/common.hpp"
#include "drift/econometrics/design.hpp"
#include "drift/ingest/posts.hpp"
#include "drift/novelty/daily.hpp"

namespace drift::pipeline {

using json = nlohmann::json;

/// One exposure measure. `kind` is density or mentions (transcript file),
/// external (date,value file) or mean (day-wise mean of other exposures'
/// raw values, named in `components`).
struct ExposureSource {
  std::string name;
  std::string label;
  std::string kind;
  std::filesystem::path path;
  std::vector<std::string> components;
};

/// Alternative transcript keyword used as a placebo exposure.
struct PlaceboSource {
  std::string name;
  std::string label;
  std::filesystem::path path;
};

struct LpWindow {
  int from = 0;
  int to = 0;
};

struct RunConfig {
  std::filesystem::path posts;
  std::filesystem::path embeddings;
  std::string timezone = ingest::kDefaultTimezone;
  Date inauguration = Date(2025, 1, 20);
  std::optional<Date> sample_start;
  std::optional<Date> sample_end;
  bool whiten = true;
  std::vector<novelty::NoveltyConfig> novelty;  // first entry is the outcome of every model
  std::vector<ExposureSource> exposures;
  std::string primary_exposure;
  std::vector<PlaceboSource> falsification;
  econometrics::RegressionSpec base;  // p, H, controls, trend; q and leads come from the grid
  std::vector<int> q_grid{1, 3, 7};
  int primary_q = 3;
  int leads = 3;
  int irf_min = -5;
  int irf_max = 14;
  std::vector<LpWindow> lp_windows{{-3, -1}, {0, 1}, {0, 3}, {0, 7}, {0, 14}};
  int pretrend_leads = 5;
  int placebo_shuffles = 0;
  std::uint64_t seed = 20251017;
  std::filesystem::path output_dir = "results";
  unsigned threads = 1;
  /// Normalized JSON of every setting that can change a result (paths as
  /// written, no output directory or thread count).
  json echo;

  const ExposureSource& exposure(const std::string& name) const {
    for (const auto& e : exposures) {
      if (e.name == name) return e;
    }
    throw Error("config: unknown exposure '" + name + "'");
  }
  const novelty::NoveltyConfig& outcome() const { return novelty.front(); }

  /// Spec grid: one RegressionSpec per q in q_grid.
  std::vector<econometrics::RegressionSpec> spec_grid() const {
    std::vector<econometrics::RegressionSpec> out;
    for (int q : q_grid) out.push_back(spec_for(q, 0));
    return out;
  }
  econometrics::RegressionSpec spec_for(int q, int leads_count) const {
    auto s = base;
    s.q = q;
    s.leads = leads_count;
    s.sample_start = sample_start;
    s.sample_end = sample_end;
    return s;
  }
};

/// Paper defaults; the config file only needs input paths.
inline json default_config() {
  return json{
      {"timezone", ingest::kDefaultTimezone},
      {"inauguration_date", "2025-01-20"},
      {"sample", {{"start", nullptr}, {"end", nullptr}}},
      {"whiten", true},
      {"novelty", json::array({{{"metric", "energy"}, {"window_days", 7}, {"min_day_posts", 3}, {"min_ref_posts", 10}},
                               {{"metric", "mmd2"}, {"window_days", 30}, {"min_day_posts", 3}, {"min_ref_posts", 10}}})},
      {"exposures", json::array()},
      {"falsification", json::array()},
      {"regression",
       {{"p", 7},
        {"hac_bandwidth", 7},
        {"controls", {"dow", "month", "post_inauguration", "post_count", "log1p_post_count"}},
        {"include_trend", false}}},
      {"q_grid", {1, 3, 7}},
      {"primary_q", 3},
      {"leads", 3},
      {"irf", {{"h_min", -5}, {"h_max", 14}}},
      {"lp_windows", {{-3, -1}, {0, 1}, {0, 3}, {0, 7}, {0, 14}}},
      {"pretrend_leads", 5},
      {"placebo_shuffles", 0},
      {"seed", 20251017},
      {"output_dir", "results"},
      {"threads", 1},
  };
}

namespace detail {

/// Overlays `patch` on `base`: objects merge key by key, anything else
/// replaces.
inline void merge_into(json& base, const json& patch) {
  if (!patch.is_object() || !base.is_object()) {
    base = patch;
    return;
  }
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (base.contains(it.key())) {
      merge_into(base[it.key()], it.value());
    } else {
      base[it.key()] = it.value();
    }
  }
}

template <class T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw Error("config: " + where + " is missing '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error("config: " + where + "." + key + " has the wrong type");
  }
}

inline std::optional<Date> optional_date(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return parse_date(get_field<std::string>(j, key, "sample"));
}

}  // namespace detail

/// Applies one `key.path=value` override. The value is parsed as JSON when
/// it is valid JSON and taken as a string otherwise.
inline void apply_override(json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &cfg;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw Error("override '" + assignment + "' has an empty key segment");
    if (node->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(part);
      } catch (const std::exception&) {
        throw Error("override '" + assignment + "': '" + part + "' is not an array index");
      }
      if (idx >= node->size()) throw Error("override '" + assignment + "': index " + part + " out of range");
      node = &(*node)[idx];
    } else {
      if (!node->is_object()) *node = json::object();
      node = &(*node)[part];
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = std::move(value);
}

/// Turns merged JSON into a RunConfig. Relative paths resolve against
/// `base_dir`. Checks values and that every required input exists;
/// placebo keyword files may be absent (they are reported as skipped).
inline RunConfig parse_config(const json& merged, const std::filesystem::path& base_dir) {
  RunConfig c;
  const auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  };
  const auto require_file = [](const std::filesystem::path& p, const std::string& what) {
    if (!std::filesystem::is_regular_file(p)) throw Error("config: " + what + " '" + p.string() + "' does not exist");
  };

  c.posts = resolve(detail::get_field<std::string>(merged, "posts", "config"));
  c.embeddings = resolve(detail::get_field<std::string>(merged, "embeddings", "config"));
  c.timezone = detail::get_field<std::string>(merged, "timezone", "config");
  ingest::Timezone::load(c.timezone);
  c.inauguration = parse_date(detail::get_field<std::string>(merged, "inauguration_date", "config"));
  const auto& sample = merged.at("sample");
  c.sample_start = detail::optional_date(sample, "start");
  c.sample_end = detail::optional_date(sample, "end");
  if (c.sample_start && c.sample_end && *c.sample_start > *c.sample_end) throw Error("config: sample start after end");
  c.whiten = detail::get_field<bool>(merged, "whiten", "config");

  const auto& nov = merged.at("novelty");
  if (!nov.is_array() || nov.empty()) throw Error("config: novelty must be a non-empty list");
  for (const auto& n : nov) {
    auto nc = novelty::NoveltyConfig::defaults_for(novelty::parse_metric(detail::get_field<std::string>(n, "metric", "novelty")));
    if (n.contains("window_days")) nc.window_days = detail::get_field<int>(n, "window_days", "novelty");
    if (n.contains("min_day_posts")) nc.min_day_posts = detail::get_field<int>(n, "min_day_posts", "novelty");
    if (n.contains("min_ref_posts")) nc.min_ref_posts = detail::get_field<int>(n, "min_ref_posts", "novelty");
    if (n.contains("gamma_rule")) {
      const auto rule = detail::get_field<std::string>(n, "gamma_rule", "novelty");
      if (rule == "inverse_two_m2") {
        nc.gamma_rule = novelty::GammaRule::inverse_two_m2;
      } else if (rule == "inverse_m2") {
        nc.gamma_rule = novelty::GammaRule::inverse_m2;
      } else {
        throw Error("config: unknown gamma_rule '" + rule + "'");
      }
    }
    if (n.contains("estimator")) {
      const auto est = detail::get_field<std::string>(n, "estimator", "novelty");
      if (est == "v") {
        nc.estimator = novelty::Estimator::v_statistic;
      } else if (est == "u") {
        nc.estimator = novelty::Estimator::u_statistic;
      } else {
        throw Error("config: estimator must be 'v' or 'u'");
      }
    }
    nc.validate();
    for (const auto& prev : c.novelty) {
      if (prev.metric == nc.metric) throw Error("config: novelty metric '" + novelty::to_string(nc.metric) + "' listed twice");
    }
    c.novelty.push_back(nc);
  }

  for (const auto& e : merged.at("exposures")) {
    ExposureSource s;
    s.name = detail::get_field<std::string>(e, "name", "exposure");
    s.label = e.value("label", s.name);
    s.kind = detail::get_field<std::string>(e, "kind", "exposure '" + s.name + "'");
    if (s.kind == "density" || s.kind == "mentions" || s.kind == "external") {
      s.path = resolve(detail::get_field<std::string>(e, "path", "exposure '" + s.name + "'"));
      require_file(s.path, "exposure file");
    } else if (s.kind == "mean") {
      s.components = detail::get_field<std::vector<std::string>>(e, "components", "exposure '" + s.name + "'");
      if (s.components.empty()) throw Error("config: mean exposure '" + s.name + "' has no components");
    } else {
      throw Error("config: exposure '" + s.name + "' has unknown kind '" + s.kind + "'");
    }
    for (const auto& prev : c.exposures) {
      if (prev.name == s.name) throw Error("config: exposure '" + s.name + "' listed twice");
    }
    c.exposures.push_back(std::move(s));
  }
  if (c.exposures.empty()) throw Error("config: no exposures configured");
  for (const auto& e : c.exposures) {
    for (const auto& comp : e.components) {
      const auto& part = c.exposure(comp);
      if (part.kind == "mean") throw Error("config: mean exposure '" + e.name + "' cannot nest mean '" + comp + "'");
    }
  }
  c.primary_exposure = merged.value("primary_exposure", c.exposures.front().name);
  c.exposure(c.primary_exposure);

  for (const auto& f : merged.at("falsification")) {
    PlaceboSource p;
    p.name = detail::get_field<std::string>(f, "name", "falsification");
    p.label = f.value("label", p.name);
    p.path = resolve(detail::get_field<std::string>(f, "path", "falsification '" + p.name + "'"));
    c.falsification.push_back(std::move(p));
  }

  const auto& reg = merged.at("regression");
  c.base.p = detail::get_field<int>(reg, "p", "regression");
  c.base.hac_bandwidth = detail::get_field<int>(reg, "hac_bandwidth", "regression");
  c.base.controls = detail::get_field<std::vector<std::string>>(reg, "controls", "regression");
  c.base.include_trend = detail::get_field<bool>(reg, "include_trend", "regression");
  c.base.validate();
  static const std::vector<std::string> kKnownControls = {"dow", "month", "post_inauguration", "post_count", "log1p_post_count"};
  for (const auto& k : c.base.controls) {
    if (std::find(kKnownControls.begin(), kKnownControls.end(), k) == kKnownControls.end() &&
        k.rfind("dow_", 0) != 0 && k.rfind("month_", 0) != 0) {
      throw Error("config: unknown control '" + k + "'");
    }
  }

  c.q_grid = detail::get_field<std::vector<int>>(merged, "q_grid", "config");
  if (c.q_grid.empty()) throw Error("config: spec grid (q_grid) is empty");
  for (int q : c.q_grid) {
    if (q < 0) throw Error("config: q_grid entries must be >= 0");
  }
  c.primary_q = detail::get_field<int>(merged, "primary_q", "config");
  c.leads = detail::get_field<int>(merged, "leads", "config");
  if (c.primary_q < 0 || c.leads < 1) throw Error("config: primary_q must be >= 0 and leads >= 1");
  c.irf_min = detail::get_field<int>(merged.at("irf"), "h_min", "irf");
  c.irf_max = detail::get_field<int>(merged.at("irf"), "h_max", "irf");
  if (c.irf_min > c.irf_max) throw Error("config: irf.h_min exceeds irf.h_max");
  c.lp_windows.clear();
  for (const auto& w : merged.at("lp_windows")) {
    if (!w.is_array() || w.size() != 2) throw Error("config: each lp_windows entry is [from, to]");
    LpWindow lw{w[0].get<int>(), w[1].get<int>()};
    if (lw.from > lw.to) throw Error("config: lp window start exceeds its end");
    c.lp_windows.push_back(lw);
  }
  c.pretrend_leads = detail::get_field<int>(merged, "pretrend_leads", "config");
  if (c.pretrend_leads < 1) throw Error("config: pretrend_leads must be >= 1");
  c.placebo_shuffles = detail::get_field<int>(merged, "placebo_shuffles", "config");
  if (c.placebo_shuffles < 0) throw Error("config: placebo_shuffles must be >= 0");
  c.seed = detail::get_field<std::uint64_t>(merged, "seed", "config");
  c.output_dir = resolve(detail::get_field<std::string>(merged, "output_dir", "config"));
  const int threads = detail::get_field<int>(merged, "threads", "config");
  if (threads < 1) throw Error("config: threads must be >= 1");
  c.threads = static_cast<unsigned>(threads);

  require_file(c.posts, "posts file");
  require_file(c.embeddings, "embedding file");

  c.echo = merged;
  c.echo.erase("output_dir");
  c.echo.erase("threads");
  return c;
}

/// Reads a JSON config file, overlays it on the defaults, applies
/// `overrides` in order and validates the result.
inline RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  json file = json::parse(in, nullptr, false);
  if (file.is_discarded() || !file.is_object()) throw Error("config '" + path.string() + "' is not a JSON object");
  json merged = default_config();
  detail::merge_into(merged, file);
  for (const auto& o : overrides) apply_override(merged, o);
  return parse_config(merged, path.parent_path());
}

}  // namespace drift::pipeline
