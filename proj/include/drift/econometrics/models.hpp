#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drift/common.hpp"
#include "drift/econometrics/design.hpp"
#include "drift/econometrics/hac.hpp"
#include "drift/econometrics/inference.hpp"
#include "drift/ingest/controls.hpp"

namespace drift::econometrics {

/// ARDL fit with the cumulative exposure effect (sum of E_lag0..q) and,
/// when leads are present, the cumulative lead effect.
struct ArdlFit {
  RegressionSpec spec;
  Design design;
  RegressionResult result;
  LinearComboTest beta_sum;
  std::optional<LinearComboTest> delta_sum;
};

inline std::vector<std::string> exposure_lag_labels(int q) {
  std::vector<std::string> out;
  for (int j = 0; j <= q; ++j) out.push_back(e_lag_label(j));
  return out;
}

inline std::vector<std::string> exposure_lead_labels(int leads) {
  std::vector<std::string> out;
  for (int h = 1; h <= leads; ++h) out.push_back(e_lead_label(h));
  return out;
}

inline ArdlFit fit_ardl(const Series& Y, const Series& E, const ingest::ControlMatrix& controls, const RegressionSpec& spec) {
  ArdlFit f;
  f.spec = spec;
  f.design = build_design(Y, E, controls, spec);
  f.result = fit_hac(f.design, spec.hac_bandwidth);
  f.beta_sum = sum_test(f.result, exposure_lag_labels(spec.q));
  if (spec.leads > 0) f.delta_sum = sum_test(f.result, exposure_lead_labels(spec.leads));
  return f;
}

/// Response estimate for one horizon or one cumulative window.
struct LpEstimate {
  int from = 0;
  int to = 0;
  LinearComboTest test;
  std::size_t n = 0;
};

/// Regresses sum_{j=from}^{to} Y_{t+j} on E_t, p lags of Y and the spec's
/// controls (exposure lags/leads in `spec` are ignored).
inline LpEstimate lp_window(const Series& Y, const Series& E, const ingest::ControlMatrix& controls, RegressionSpec spec,
                            int from, int to) {
  if (from > to) throw Error("local projection window start exceeds its end");
  spec.q = 0;
  spec.leads = 0;
  Design d;
  try {
    d = build_design(Y, E, controls, spec, OutcomeWindow{from, to});
  } catch (const Error& e) {
    throw Error("insufficient overlap for window [" + std::to_string(from) + ", " + std::to_string(to) + "]: " + e.what());
  }
  const auto r = fit_hac(d, spec.hac_bandwidth);
  LpEstimate out;
  out.from = from;
  out.to = to;
  out.test = sum_test(r, {e_lag_label(0)});
  out.n = r.n;
  return out;
}

/// Level response theta_h of Y_{t+h} to E_t.
inline LpEstimate local_projection(const Series& Y, const Series& E, const ingest::ControlMatrix& controls,
                                   const RegressionSpec& spec, int h) {
  return lp_window(Y, E, controls, spec, h, h);
}

/// Response of the cumulative outcome sum_{j=a}^{b} Y_{t+j}.
inline LpEstimate cumulative_lp(const Series& Y, const Series& E, const ingest::ControlMatrix& controls,
                                const RegressionSpec& spec, int a, int b) {
  return lp_window(Y, E, controls, spec, a, b);
}

struct IrfResult {
  std::vector<int> horizons;
  std::vector<LpEstimate> level;
  std::vector<LpEstimate> cumulative;  // [0, h] for h >= 0, [h, -1] for h < 0
};

inline IrfResult impulse_response(const Series& Y, const Series& E, const ingest::ControlMatrix& controls,
                                  const RegressionSpec& spec, int h_min, int h_max, unsigned threads = 1) {
  if (h_min > h_max) throw Error("irf: empty horizon range");
  IrfResult out;
  const auto count = static_cast<std::size_t>(h_max - h_min + 1);
  out.level.resize(count);
  out.cumulative.resize(count);
  for (int h = h_min; h <= h_max; ++h) out.horizons.push_back(h);
  parallel_for(count, threads, [&](std::size_t i) {
    const int h = out.horizons[i];
    out.level[i] = local_projection(Y, E, controls, spec, h);
    out.cumulative[i] = h >= 0 ? cumulative_lp(Y, E, controls, spec, 0, h) : cumulative_lp(Y, E, controls, spec, h, -1);
  });
  return out;
}

struct PretrendTest {
  WaldTest wald;
  std::size_t n = 0;
  std::vector<std::string> labels;
};

/// Joint test that E_{t+1}..E_{t+leads} carry no information about Y_t
/// once E_t, p lags of Y and the controls are included. Single regression;
/// Wald statistic on the lead block of the HAC covariance.
inline PretrendTest joint_pretrend_wald(const Series& Y, const Series& E, const ingest::ControlMatrix& controls,
                                        RegressionSpec spec, int leads = 5) {
  if (leads < 1) throw Error("pretrend: need at least one lead");
  spec.q = 0;
  spec.leads = leads;
  const auto d = build_design(Y, E, controls, spec);
  const auto r = fit_hac(d, spec.hac_bandwidth);
  PretrendTest out;
  out.labels = exposure_lead_labels(leads);
  out.wald = wald_zero(r, out.labels);
  out.n = r.n;
  return out;
}

}  // namespace drift::econometrics
