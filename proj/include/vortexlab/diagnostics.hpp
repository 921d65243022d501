#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "vortexlab/biot_savart.hpp"
#include "vortexlab/evolution.hpp"
#include "vortexlab/grid.hpp"
#include "vortexlab/math_util.hpp"
#include "vortexlab/vortex.hpp"
#include "vortexlab/weights.hpp"

namespace vortexlab {

// Least-squares slope of log y against log x restricted to x in [lo, hi].
inline LinearFit fit_log_slope(const std::vector<double>& x,
                               const std::vector<double>& y, double lo,
                               double hi) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
    if (x[i] < lo || x[i] > hi || !(y[i] > 0.0)) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 3)
    throw std::runtime_error("slope fit needs at least 3 points in the window");
  return linear_fit(lx, ly);
}

// The profile seen by a co-rotating observer, e^{i k t u(r)} omega(t, r).
// Its pointwise modulus matches omega but relative phases matter when
// averaging in time or differencing snapshots.
inline ModeField corotating_profile(const RadialVortex& vort,
                                    const EvolutionState& st) {
  ModeField f(st.omega.k, st.omega.grid);
  for (int i = 0; i < f.grid->size(); ++i)
    f.v[i] = std::polar(1.0, st.omega.k * st.t * vort.u(f.grid->r[i])) *
             st.omega.v[i];
  return f;
}

// ---------------------------------------------------------------------------
// Inviscid damping: decay of the streamfunction and velocity norms in time.
// ---------------------------------------------------------------------------

struct DampingReport {
  std::vector<double> ts, psi_norm, rur_norm, rutheta_norm;
  LinearFit psi_fit, rur_fit, rutheta_fit;
};

inline DampingReport damping_report(const std::vector<EvolutionState>& states,
                                    double fit_lo, double fit_hi,
                                    double delta = 0.1) {
  DampingReport rep;
  const WeightSpec wpsi{WeightFamily::psi, delta};
  for (const auto& st : states) {
    if (st.psi.grid == nullptr)
      throw std::invalid_argument("damping_report: state lacks a streamfunction");
    rep.ts.push_back(st.t);
    const double pn = weighted_norm(st.psi, wpsi);
    rep.psi_norm.push_back(pn);
    // r u^r = i k psi, so this norm is |k| times the previous one
    rep.rur_norm.push_back(std::abs(st.psi.k) * pn);
    const RadialGrid& g = *st.psi.grid;
    const auto dpsi = derivative_samples(g, st.psi.v, 1, 5);
    ModeField rut(st.psi.k, st.psi.grid);
    for (int i = 0; i < g.size(); ++i) rut.v[i] = -g.r[i] * dpsi[i];
    rep.rutheta_norm.push_back(weighted_norm(rut, wpsi));
  }
  rep.psi_fit = fit_log_slope(rep.ts, rep.psi_norm, fit_lo, fit_hi);
  rep.rur_fit = fit_log_slope(rep.ts, rep.rur_norm, fit_lo, fit_hi);
  rep.rutheta_fit = fit_log_slope(rep.ts, rep.rutheta_norm, fit_lo, fit_hi);
  return rep;
}

// ---------------------------------------------------------------------------
// Vorticity depletion: the small-r power of the co-rotating profile steepens
// from r^|k| to r^{|k|+2} near the critical layer's long-time limit, while a
// passively advected field keeps its initial power.  Slopes are measured on
// log |profile| over a small-r window, per snapshot and for the complex
// time average over the snapshots with t >= t_min.
// ---------------------------------------------------------------------------

struct DepletionReport {
  std::vector<double> ts;
  std::vector<double> slopes;
  std::vector<double> slope_errs;
  LinearFit averaged;
  double r_lo = 0.0, r_hi = 0.0;
};

inline DepletionReport depletion_report(const RadialVortex& vort,
                                        const std::vector<EvolutionState>& states,
                                        double r_lo, double r_hi,
                                        double t_min = 0.0) {
  if (states.empty())
    throw std::invalid_argument("depletion_report: no snapshots");
  DepletionReport rep;
  rep.r_lo = r_lo;
  rep.r_hi = r_hi;
  const RadialGrid& g = *states.front().omega.grid;
  std::vector<double> mod(g.size());
  std::vector<complexd> avg(g.size(), complexd{0.0, 0.0});
  int avg_count = 0;
  for (const auto& st : states) {
    for (int i = 0; i < g.size(); ++i) mod[i] = std::abs(st.omega.v[i]);
    rep.ts.push_back(st.t);
    const auto fit =
        fit_log_slope(std::vector<double>(g.r.begin(), g.r.end()), mod, r_lo, r_hi);
    rep.slopes.push_back(fit.slope);
    rep.slope_errs.push_back(fit.stderr_slope);
    if (st.t >= t_min) {
      const auto prof = corotating_profile(vort, st);
      for (int i = 0; i < g.size(); ++i) avg[i] += prof.v[i];
      ++avg_count;
    }
  }
  if (avg_count == 0)
    throw std::invalid_argument("depletion_report: no snapshots at or after t_min");
  for (int i = 0; i < g.size(); ++i) mod[i] = std::abs(avg[i]) / avg_count;
  rep.averaged =
      fit_log_slope(std::vector<double>(g.r.begin(), g.r.end()), mod, r_lo, r_hi);
  return rep;
}

// ---------------------------------------------------------------------------
// Scattering: the co-rotating profile converges as t -> infinity.  The
// Cauchy increments between consecutive snapshots, measured in the f-family
// weighted norm, should decay like a power of t.
// ---------------------------------------------------------------------------

struct ScatteringReport {
  std::vector<double> ts;          // left endpoint of each snapshot pair
  std::vector<double> increments;  // profile difference norms
  LinearFit tail;
  bool tail_decreasing = false;
  int pairs_checked = 0;
};

inline ScatteringReport scattering_report(const RadialVortex& vort,
                                          const std::vector<EvolutionState>& states,
                                          const WeightSpec& spec = {WeightFamily::f, 0.1},
                                          double fit_lo = -1.0,
                                          int check_last = 4) {
  if (states.size() < 3)
    throw std::invalid_argument("scattering_report: need at least 3 snapshots");
  ScatteringReport rep;
  ModeField prev = corotating_profile(vort, states[0]);
  for (std::size_t j = 1; j < states.size(); ++j) {
    ModeField cur = corotating_profile(vort, states[j]);
    ModeField diff = cur;
    for (std::size_t i = 0; i < diff.v.size(); ++i) diff.v[i] -= prev.v[i];
    rep.ts.push_back(states[j - 1].t);
    rep.increments.push_back(weighted_norm(diff, spec));
    prev = std::move(cur);
  }
  const int np = static_cast<int>(rep.increments.size());
  rep.pairs_checked = std::min(check_last, np - 1);
  rep.tail_decreasing = rep.pairs_checked >= 1;
  for (int j = np - rep.pairs_checked; j < np; ++j)
    if (!(rep.increments[j] < rep.increments[j - 1])) rep.tail_decreasing = false;
  if (fit_lo < 0.0) fit_lo = rep.ts[np / 2];
  rep.tail = fit_log_slope(rep.ts, rep.increments, fit_lo,
                           rep.ts.back() * (1.0 + 1e-12));
  return rep;
}

}  // namespace vortexlab
