#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "vortexlab/biot_savart.hpp"
#include "vortexlab/grid.hpp"
#include "vortexlab/vortex.hpp"
#include "vortexlab/weights.hpp"

namespace vortexlab {

// ---------------------------------------------------------------------------
// Mode-k linearized evolution around the base vortex:
//
//   d omega / dt = -i k ( u(r) omega - beta(r) psi ),   psi = BiotSavart(omega).
//
// Classical RK4 with a fixed step chosen against the fastest advective phase,
// dt = 0.1 / (|k| u(0) dt_factor).  Snapshot times are hit exactly by
// subdividing each interval into equal steps.  The quadratic form
// int |omega|^2 r / beta dr is conserved by the continuum flow, as is
// int omega r^2 dr when |k| = 1; both are tracked as drift diagnostics and
// the first doubles as the instability guard.
// ---------------------------------------------------------------------------

struct EvolveOptions {
  double dt_factor = 5.0;
  bool passive = false;        // drop the beta psi coupling (pure transport)
  bool phase_aware = true;     // oscillation-resolving Biot-Savart quadrature
  bool stability_check = true;
};

struct EvolutionState {
  double t = 0.0;
  ModeField omega;
  ModeField psi;
  double beta_norm = 0.0;
  complexd momentum{0.0, 0.0};  // int omega r^2 dr
};

struct EvolutionResult {
  std::vector<EvolutionState> states;
  double dt = 0.0;
  long steps = 0;
  double max_beta_drift = 0.0;      // relative drift of the conserved norm
  double max_momentum_drift = 0.0;  // relative drift of int omega r^2 dr
};

inline ModeField steady_state_field(const RadialVortex& vort,
                                    std::shared_ptr<const RadialGrid> grid,
                                    int k) {
  if (std::abs(k) != 1)
    throw std::invalid_argument("steady state r beta exists only for |k| = 1");
  ModeField f(k, std::move(grid));
  for (int i = 0; i < f.grid->size(); ++i)
    f.v[i] = complexd{f.grid->r[i] * vort.beta(f.grid->r[i]), 0.0};
  return f;
}

// Remove the steady component from a |k| = 1 field.  The returned coefficient
// is <omega, r beta> / <r beta, r beta> in the conserved inner product, which
// reduces to int omega r^2 dr / int r^3 beta dr.
inline std::pair<ModeField, complexd> project_orthogonal(const RadialVortex& vort,
                                                         const ModeField& omega) {
  if (std::abs(omega.k) != 1)
    throw std::invalid_argument("projection applies only to |k| = 1");
  const RadialGrid& g = *omega.grid;
  std::vector<complexd> num(g.size());
  std::vector<double> den(g.size());
  for (int i = 0; i < g.size(); ++i) {
    const double r = g.r[i];
    num[i] = omega.v[i] * r * r;
    den[i] = r * r * r * vort.beta(r);
  }
  const complexd c = integrate(g, num) / integrate(g, den);
  ModeField out = omega;
  for (int i = 0; i < g.size(); ++i)
    out.v[i] -= c * g.r[i] * vort.beta(g.r[i]);
  return {std::move(out), c};
}

inline complexd radial_moment(const ModeField& omega) {
  const RadialGrid& g = *omega.grid;
  std::vector<complexd> integrand(g.size());
  for (int i = 0; i < g.size(); ++i)
    integrand[i] = omega.v[i] * g.r[i] * g.r[i];
  return integrate(g, integrand);
}

inline EvolutionResult evolve(const RadialVortex& vort, const ModeField& omega_in,
                              const std::vector<double>& snapshot_times,
                              const EvolveOptions& opts = {}) {
  if (omega_in.k == 0) throw std::invalid_argument("k must be a nonzero integer");
  const RadialGrid& g = *omega_in.grid;
  const int n = g.size();
  const int k = omega_in.k;
  const double ak = std::abs(static_cast<double>(k));

  std::vector<double> times = snapshot_times;
  std::sort(times.begin(), times.end());
  if (!times.empty() && times.front() < 0.0)
    throw std::invalid_argument("snapshot times must be nonnegative");

  std::vector<double> u_r(n), beta_r(n);
  for (int i = 0; i < n; ++i) {
    u_r[i] = vort.u(g.r[i]);
    beta_r[i] = vort.beta(g.r[i]);
  }

  const double dt_max = 0.1 / (ak * vort.u0 * opts.dt_factor);

  auto rhs = [&](double t, const std::vector<complexd>& w,
                 std::vector<complexd>& dw) {
    if (opts.passive) {
      for (int i = 0; i < n; ++i)
        dw[i] = complexd{0.0, -k * u_r[i]} * w[i];
      return;
    }
    ModeField wf(k, omega_in.grid);
    wf.v = w;
    const ModeField psi = opts.phase_aware
                              ? solve_streamfunction_kernel(wf, vort, k * t)
                              : solve_streamfunction_kernel(wf);
    for (int i = 0; i < n; ++i)
      dw[i] = complexd{0.0, -static_cast<double>(k)} *
              (u_r[i] * w[i] - beta_r[i] * psi.v[i]);
  };

  auto snapshot_psi = [&](double t, const std::vector<complexd>& w) {
    ModeField wf(k, omega_in.grid);
    wf.v = w;
    return opts.phase_aware ? solve_streamfunction_kernel(wf, vort, k * t)
                            : solve_streamfunction_kernel(wf);
  };

  auto beta_norm_of = [&](const std::vector<complexd>& w) {
    std::vector<double> q(n);
    for (int i = 0; i < n; ++i) {
      const double m = std::norm(w[i]);
      // beta underflows far out; vanished fields contribute 0, not 0 * inf
      q[i] = m == 0.0 ? 0.0 : m * g.r[i] / beta_r[i];
    }
    return std::sqrt(std::max(0.0, integrate(g, q)));
  };

  EvolutionResult out;
  out.dt = dt_max;
  std::vector<complexd> w = omega_in.v;
  std::vector<complexd> k1(n), k2(n), k3(n), k4(n), tmp(n);

  const double norm0 = beta_norm_of(w);
  ModeField m0(k, omega_in.grid);
  m0.v = w;
  const complexd mom0 = radial_moment(m0);

  double t = 0.0;
  auto record = [&](double tt) {
    EvolutionState s;
    s.t = tt;
    s.omega = ModeField(k, omega_in.grid);
    s.omega.v = w;
    s.psi = snapshot_psi(tt, w);
    s.beta_norm = beta_norm_of(w);
    s.momentum = radial_moment(s.omega);
    if (norm0 > 0.0)
      out.max_beta_drift =
          std::max(out.max_beta_drift, std::abs(s.beta_norm - norm0) / norm0);
    if (std::abs(k) == 1 && std::abs(mom0) > 0.0)
      out.max_momentum_drift = std::max(out.max_momentum_drift,
                                        std::abs(s.momentum - mom0) / std::abs(mom0));
    out.states.push_back(std::move(s));
  };

  std::size_t next = 0;
  if (next < times.size() && times[next] <= 1e-14) {
    record(0.0);
    ++next;
  }

  for (; next < times.size(); ++next) {
    const double target = times[next];
    const long m = std::max(1L, static_cast<long>(std::ceil((target - t) / dt_max - 1e-12)));
    const double h = (target - t) / m;
    for (long s = 0; s < m; ++s) {
      rhs(t, w, k1);
      for (int i = 0; i < n; ++i) tmp[i] = w[i] + 0.5 * h * k1[i];
      rhs(t + 0.5 * h, tmp, k2);
      for (int i = 0; i < n; ++i) tmp[i] = w[i] + 0.5 * h * k2[i];
      rhs(t + 0.5 * h, tmp, k3);
      for (int i = 0; i < n; ++i) tmp[i] = w[i] + h * k3[i];
      rhs(t + h, tmp, k4);
      for (int i = 0; i < n; ++i)
        w[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      t += h;
      ++out.steps;
      if (opts.stability_check && norm0 > 0.0) {
        const double bn = beta_norm_of(w);
        if (bn > norm0 * (1.0 + 0.01 * (t + 1.0))) {
          std::ostringstream os;
          os << "time integration unstable: conserved norm grew from " << norm0
             << " to " << bn << " by t = " << t;
          throw std::runtime_error(os.str());
        }
      }
    }
    t = target;
    record(t);
  }
  return out;
}

}  // namespace vortexlab
