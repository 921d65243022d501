#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "vortexlab/grid.hpp"
#include "vortexlab/math_util.hpp"
#include "vortexlab/vortex.hpp"

namespace vortexlab {

// ---------------------------------------------------------------------------
// Mode-k Biot-Savart law on the half line:
//
//   psi(r) = int_0^inf G_k(r, rho) omega(rho) drho,
//   G_k(r, rho) = (rho / 2k) min(rho/r, r/rho)^k,         k = |mode|.
//
// The normalization is pinned by the steady pair: omega = r beta must give
// psi = r u exactly.
//
// The solve is a two-pass cumulative form of the grid quadrature: an inbound
// pass accumulates r^{-k} int_0^r rho^{k+1} omega drho and an outbound pass
// r^k int_r^inf rho^{1-k} omega drho.  Both passes carry ratio powers
// (rho/r_ref)^k with r_ref the running endpoint, so no power of r ever
// overflows regardless of k.  Small closed-form head and tail corrections
// account for mass outside the grid.
// ---------------------------------------------------------------------------

inline double kernel_eval(int k, double r, double rho) {
  const int ak = std::abs(k);
  if (ak == 0) throw std::invalid_argument("k must be a nonzero integer");
  const double ratio = std::min(rho / r, r / rho);
  return rho / (2.0 * ak) * std::pow(ratio, ak);
}

namespace detail {

// Local log-slope of |f| near the outer edge, for the tail extrapolation.
inline double edge_log_slope(const RadialGrid& g, const std::vector<complexd>& f) {
  const int n = g.size();
  const double m1 = std::abs(f[n - 1]), m0 = std::abs(f[n - 4]);
  if (!(m1 > 0.0) || !(m0 > 0.0)) return -40.0;
  const double s = std::log(m1 / m0) / std::log(g.r[n - 1] / g.r[n - 4]);
  return std::clamp(s, -40.0, -4.0);
}

}  // namespace detail

// Plain solve; valid whenever the integrand is resolved on the grid.
inline ModeField solve_streamfunction_kernel(const ModeField& omega) {
  const RadialGrid& g = *omega.grid;
  const int n = g.size();
  const int k = std::abs(omega.k);
  if (k == 0) throw std::invalid_argument("k must be a nonzero integer");

  ModeField psi(omega.k, omega.grid);

  // Inbound: P_i = r_i^{-k} int_0^{r_i} rho^{k+1} omega drho.
  std::vector<complexd> P(n);
  // Head: omega ~ omega_0 (rho/r_0)^k below the first node.
  P[0] = omega.v[0] * g.r[0] * g.r[0] / (2.0 * k + 2.0);
  for (int p = 0; p < n - 1; ++p) {
    const int s = g.panel_start[p];
    const double ref = g.r[p + 1];
    complexd panel{};
    for (int m = 0; m < 4; ++m) {
      const double rho = g.r[s + m];
      panel += g.panel_w[p][m] * std::pow(rho / ref, k) * rho * omega.v[s + m];
    }
    P[p + 1] = P[p] * std::pow(g.r[p] / ref, k) + panel;
  }

  // Outbound: Q_i = r_i^k int_{r_i}^inf rho^{1-k} omega drho.
  std::vector<complexd> Q(n);
  const double sigma = detail::edge_log_slope(g, omega.v);
  Q[n - 1] = omega.v[n - 1] * g.r[n - 1] * g.r[n - 1] / (k - 2.0 - sigma);
  for (int p = n - 2; p >= 0; --p) {
    const int s = g.panel_start[p];
    const double ref = g.r[p];
    complexd panel{};
    for (int m = 0; m < 4; ++m) {
      const double rho = g.r[s + m];
      panel += g.panel_w[p][m] * std::pow(ref / rho, k) * rho * omega.v[s + m];
    }
    Q[p] = Q[p + 1] * std::pow(ref / g.r[p + 1], k) + panel;
  }

  for (int i = 0; i < n; ++i) psi.v[i] = (P[i] + Q[i]) / (2.0 * k);
  return psi;
}

// ---------------------------------------------------------------------------
// Phase-aware solve.  At time t the vorticity looks like e^{-i k t u(r)} f(r)
// with f smooth, so a fixed-grid cubic rule loses accuracy once k t u' h is
// no longer small even though the product is still resolved.  Here each
// panel integral is evaluated as
//
//   int e^{-i k t u(x)} [cubic through e^{+i k t u_j} omega_j] (x/ref)^k x dx
//
// with Gauss-Legendre points per subpanel, subdividing so each subpanel
// spans at most pi/4 of phase.  At t = 0 (or when the phase per panel is
// tiny) this reduces to the plain solve.
// ---------------------------------------------------------------------------

inline ModeField solve_streamfunction_kernel(const ModeField& omega,
                                             const RadialVortex& vort,
                                             double kt) {
  const RadialGrid& g = *omega.grid;
  const int n = g.size();
  const int k = std::abs(omega.k);
  if (k == 0) throw std::invalid_argument("k must be a nonzero integer");

  // Cheap path when every panel sees only a small phase increment.
  std::vector<double> u(n);
  for (int i = 0; i < n; ++i) u[i] = vort.u(g.r[i]);
  double max_phase = 0.0;
  for (int p = 0; p < n - 1; ++p)
    max_phase = std::max(max_phase, std::abs(kt) * std::abs(u[p + 1] - u[p]));
  if (max_phase <= 0.05) return solve_streamfunction_kernel(omega);

  std::vector<complexd> prof(n);
  for (int i = 0; i < n; ++i) prof[i] = std::polar(1.0, kt * u[i]) * omega.v[i];

  ModeField psi(omega.k, omega.grid);

  auto panel_integral = [&](int p, double ref, int sign) {
    // sign +1: weight (rho/ref)^k rho; sign -1: (ref/rho)^k rho.
    const int s = g.panel_start[p];
    const double a = g.r[p], b = g.r[p + 1];
    const int sub = std::max(
        1, static_cast<int>(std::ceil(std::abs(kt) * std::abs(u[p + 1] - u[p]) /
                                      (0.25 * kPi))));
    complexd acc{};
    for (int j = 0; j < sub; ++j) {
      const double aj = a + (b - a) * j / sub;
      const double bj = a + (b - a) * (j + 1) / sub;
      const double xm = 0.5 * (aj + bj), xh = 0.5 * (bj - aj);
      for (int q = 0; q < 4; ++q) {
        const double x = xm + xh * kGL4Nodes[q];
        complexd cub{};
        for (int m = 0; m < 4; ++m) {
          double Lg = 1.0;
          for (int jj = 0; jj < 4; ++jj) {
            if (jj == m) continue;
            Lg *= (x - g.r[s + jj]) / (g.r[s + m] - g.r[s + jj]);
          }
          cub += Lg * prof[s + m];
        }
        const double pw = sign > 0 ? std::pow(x / ref, k) : std::pow(ref / x, k);
        acc += xh * kGL4Weights[q] * std::polar(1.0, -kt * vort.u(x)) * cub * pw * x;
      }
    }
    return acc;
  };

  std::vector<complexd> P(n);
  P[0] = omega.v[0] * g.r[0] * g.r[0] / (2.0 * k + 2.0);
  for (int p = 0; p < n - 1; ++p)
    P[p + 1] = P[p] * std::pow(g.r[p] / g.r[p + 1], k) + panel_integral(p, g.r[p + 1], +1);

  std::vector<complexd> Q(n);
  const double sigma = detail::edge_log_slope(g, omega.v);
  Q[n - 1] = omega.v[n - 1] * g.r[n - 1] * g.r[n - 1] / (k - 2.0 - sigma);
  for (int p = n - 2; p >= 0; --p)
    Q[p] = Q[p + 1] * std::pow(g.r[p] / g.r[p + 1], k) + panel_integral(p, g.r[p], -1);

  for (int i = 0; i < n; ++i) psi.v[i] = (P[i] + Q[i]) / (2.0 * k);
  return psi;
}

// ---------------------------------------------------------------------------
// Direct finite-difference route: -(psi'' + psi'/r - k^2 psi / r^2) = omega.
// Boundary rows pin the solution to the homogeneous branches, psi ~ r^k at
// the inner edge and psi ~ r^{-k} at the outer edge, by fixing the ratio
// between the two end nodes.  Serves as an independent check on the kernel
// route; falls back to it (with a warning flag) if the tridiagonal system
// looks ill-conditioned.
// ---------------------------------------------------------------------------

struct BvpResult {
  ModeField psi;
  double condition = 0.0;
  bool fell_back = false;
};

inline BvpResult solve_streamfunction_bvp(const ModeField& omega) {
  const RadialGrid& g = *omega.grid;
  const int n = g.size();
  const double k2 = static_cast<double>(omega.k) * omega.k;
  if (omega.k == 0) throw std::invalid_argument("k must be a nonzero integer");

  const int ak = std::abs(omega.k);
  std::vector<double> sub(n, 0.0), diag(n, 0.0), sup(n, 0.0);
  std::vector<complexd> rhs(n, complexd{0.0, 0.0});
  diag[0] = 1.0;
  sup[0] = -std::pow(g.r[0] / g.r[1], ak);
  diag[n - 1] = 1.0;
  sub[n - 1] = -std::pow(g.r[n - 2] / g.r[n - 1], ak);
  for (int i = 1; i + 1 < n; ++i) {
    const double hm = g.r[i] - g.r[i - 1], hp = g.r[i + 1] - g.r[i];
    const double a2 = 2.0 / (hm * (hm + hp)), c2 = 2.0 / (hp * (hm + hp));
    const double b2 = -2.0 / (hm * hp);
    const double a1 = -hp / (hm * (hm + hp)), c1 = hm / (hp * (hm + hp));
    const double b1 = (hp - hm) / (hm * hp);
    const double r = g.r[i];
    sub[i] = -(a2 + a1 / r);
    diag[i] = -(b2 + b1 / r) + k2 / (r * r);
    sup[i] = -(c2 + c1 / r);
    rhs[i] = omega.v[i];
    // equilibrate: row magnitudes span many decades on a geometric grid
    const double s = std::max({std::abs(sub[i]), std::abs(diag[i]), std::abs(sup[i])});
    sub[i] /= s;
    diag[i] /= s;
    sup[i] /= s;
    rhs[i] /= s;
  }

  BvpResult out{ModeField(omega.k, omega.grid), 0.0, false};
  try {
    out.condition = solve_tridiagonal(sub, diag, sup, rhs);
  } catch (const std::runtime_error&) {
    out.condition = std::numeric_limits<double>::infinity();
  }
  if (!(out.condition < 1e12)) {
    out.fell_back = true;
    out.psi = solve_streamfunction_kernel(omega);
    return out;
  }
  out.psi.v = std::move(rhs);
  return out;
}

// Velocity components from the streamfunction: r u^r = i k psi and
// u^theta = -d psi / dr.
inline std::pair<ModeField, ModeField> velocity_components(const ModeField& psi) {
  const RadialGrid& g = *psi.grid;
  ModeField ur(psi.k, psi.grid), utheta(psi.k, psi.grid);
  const complexd ik{0.0, static_cast<double>(psi.k)};
  for (int i = 0; i < g.size(); ++i) ur.v[i] = ik * psi.v[i] / g.r[i];
  const auto dpsi = derivative_samples(g, psi.v, 1, 5);
  for (int i = 0; i < g.size(); ++i) utheta.v[i] = -dpsi[i];
  return {std::move(ur), std::move(utheta)};
}

}  // namespace vortexlab
