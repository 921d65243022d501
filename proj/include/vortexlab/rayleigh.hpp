#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vortexlab/grid.hpp"
#include "vortexlab/math_util.hpp"
#include "vortexlab/vortex.hpp"

namespace vortexlab {

// ---------------------------------------------------------------------------
// Resolvent-side machinery for a single mode k.  Everything here works with
// the half-derivative unknown: the operator is
//
//   Ray_z = d^2/dr^2 + (1/4 - k^2)/r^2 + beta(r)/(u(r) - z),
//
// and the inhomogeneous problem Ray_z Phi = omega sqrt(r)/(u - z) is solved
// either through an explicit Green's function built from a homogeneous
// solution (spectrum-side z, critical layer resolved on a locally refined
// grid) or through a second-order finite-difference boundary value problem.
// ---------------------------------------------------------------------------

inline constexpr double kEpsFloor = 1e-5;

// A point z = c + i*sign*eps of the resolvent set, with the critical radius
// r_c = u^{-1}(c) when c lies inside the spectrum (NaN otherwise).
struct SpectralPoint {
  double c = 0.0;
  double eps = 0.0;
  int sign = +1;
  double r_c = std::numeric_limits<double>::quiet_NaN();

  complexd z() const { return complexd{c, sign >= 0 ? eps : -eps}; }
};

inline SpectralPoint make_spectral_point(const RadialVortex& vort, double c,
                                         double eps, int sign = +1) {
  SpectralPoint sp;
  sp.c = c;
  sp.eps = eps;
  sp.sign = sign >= 0 ? +1 : -1;
  if (c > 0.0 && c < vort.u0) sp.r_c = vort.critical_radius(c);
  return sp;
}

// Solver grid: the base nodes, except that where the base spacing cannot put
// 16 nodes across the layer width eps/|u'(r_c)| the spanned stretch is
// replaced by a uniform core with graded skirts.  Skirt steps grow by 1.3x
// until they meet the local base spacing, so adjacent gap ratios stay small
// enough for the panel quadrature weights to remain positive.
struct SolverGrid {
  std::shared_ptr<RadialGrid> grid;
  int rc_node = -1;
  double r_c = std::numeric_limits<double>::quiet_NaN();
};

inline SolverGrid make_layer_grid(const RadialGrid& base, const RadialVortex& vort,
                                  double c, double eps) {
  SolverGrid sg;
  std::vector<double> nodes;

  std::vector<double> extra;
  double lo = 0.0, hi = 0.0;
  const bool on_spectrum = c > 0.0 && c < vort.u0;
  if (on_spectrum) {
    const double rc = vort.critical_radius(c);
    sg.r_c = rc;
    if (rc > 4.0 * base.r_min() && rc < 0.25 * base.r_max()) {
      const double width = eps / std::abs(vort.du(rc));
      const double delta = std::log(base.r_max() / base.r_min()) / (base.size() - 1);
      const double h_core = width / 16.0;
      if (h_core < rc * delta) {
        const double core = 4.0 * width;
        const int n_core = 64;  // core / h_core
        for (int j = -n_core; j <= n_core; ++j)
          extra.push_back(rc + core * j / n_core);
        double step = h_core, off = core;
        while (rc - off > base.r_min() && step < (rc - off) * delta) {
          step *= 1.3;
          off += step;
          extra.push_back(rc - off);
        }
        lo = rc - off - 0.5 * step;
        step = h_core;
        off = core;
        while (rc + off < base.r_max() && step < (rc + off) * delta) {
          step *= 1.3;
          off += step;
          extra.push_back(rc + off);
        }
        hi = rc + off + 0.5 * step;
        std::erase_if(extra,
                      [&](double x) { return x <= base.r_min() || x >= base.r_max(); });
      }
    }
  }

  if (extra.empty()) {
    nodes = base.r;
  } else {
    for (double x : base.r)
      if (x < lo || x > hi) nodes.push_back(x);
    nodes.insert(nodes.end(), extra.begin(), extra.end());
  }

  std::sort(nodes.begin(), nodes.end());
  // drop near-duplicates (relative gap below 1e-10)
  std::vector<double> clean;
  clean.reserve(nodes.size());
  for (double x : nodes)
    if (clean.empty() || x - clean.back() > 1e-10 * x) clean.push_back(x);

  sg.grid = make_grid_from_nodes(std::move(clean));
  if (!std::isnan(sg.r_c) && sg.r_c > 4.0 * base.r_min() &&
      sg.r_c < 0.25 * base.r_max()) {
    // anchor node: the grid node nearest r_c (r_c itself whenever the core
    // lattice was inserted)
    const auto& rr = sg.grid->r;
    const auto it = std::lower_bound(rr.begin(), rr.end(), sg.r_c);
    int i = static_cast<int>(it - rr.begin());
    if (i >= sg.grid->size()) i = sg.grid->size() - 1;
    if (i > 0 && sg.r_c - rr[i - 1] < rr[i] - sg.r_c) --i;
    sg.rc_node = i;
  }
  return sg;
}

// ---------------------------------------------------------------------------
// Homogeneous solution phi of Ray_z phi = 0, anchored at the grid node
// nearest the critical radius (the node is r_c itself whenever the layer
// needed refinement).
// Writing phi = (r/r_c)^{3/2} (u - z) p(r) and using the structural identity
// beta + u'' + 3u'/r = 0 puts the equation in self-adjoint form
//
//   d/dr [ r^3 (u-z)^2 p' ] = (k^2 - 1) r (u-z)^2 p,
//
// so with p(r_c) = 1, p'(r_c) = 0 the solution is the fixed point of
//
//   p = 1 + (k^2-1) int_{r_c}^r rho^-3 (u-z)^-2 int_{r_c}^rho s (u-z)^2 p ds drho.
//
// For |k| = 1 the bracket vanishes and phi = (r/r_c)^{3/2} (u - z) exactly.
// The iteration contracts in a sup norm weighted by the two-sided envelope
//   env(r) = (A+1)/(2A) (r/r_c)^{A-1} + (A-1)/(2A) (r/r_c)^{-A-1},  A = k+1/2,
// with factor (k^2-1)/(A^2-1) < 1.
// ---------------------------------------------------------------------------

struct HomogeneousSolution {
  int k = 1;
  complexd z{0.0, 0.0};
  double eps = 0.0;
  SolverGrid sg;
  std::vector<complexd> p;
  std::vector<complexd> phi;
  int iterations = 0;
  double contraction = 0.0;
  bool converged = true;
};

inline HomogeneousSolution homogeneous_phi(const RadialVortex& vort, int k,
                                           complexd z, const RadialGrid& base) {
  const int ak = std::abs(k);
  if (ak == 0) throw std::invalid_argument("k must be a nonzero integer");
  const double eps = std::abs(z.imag());
  if (eps < kEpsFloor)
    throw std::invalid_argument(
        "eps below the supported floor 1e-5: critical layer would be unresolvable");
  const double c = z.real();
  if (!(c > 0.0 && c < vort.u0))
    throw std::domain_error("homogeneous solution is anchored at a critical radius; "
                            "Re z must lie inside (0, u(0))");

  HomogeneousSolution hs;
  hs.k = k;
  hs.z = z;
  hs.eps = eps;
  hs.sg = make_layer_grid(base, vort, c, eps);
  if (hs.sg.rc_node < 0)
    throw std::domain_error("critical radius too close to the grid ends for the "
                            "anchored construction; use the bvp path");

  const RadialGrid& g = *hs.sg.grid;
  const int n = g.size();
  const int irc = hs.sg.rc_node;
  const double rc = hs.sg.r_c;

  std::vector<complexd> uz(n);  // u - z
  for (int i = 0; i < n; ++i) uz[i] = complexd{vort.u(g.r[i]), 0.0} - z;

  hs.p.assign(n, complexd{1.0, 0.0});
  const double A = ak + 0.5;

  std::vector<double> env(n);
  for (int i = 0; i < n; ++i) {
    const double q = g.r[i] / rc;
    env[i] = (A + 1.0) / (2.0 * A) * std::pow(q, A - 1.0) +
             (A - 1.0) / (2.0 * A) * std::pow(q, -A - 1.0);
  }

  if (ak == 1) {
    hs.iterations = 0;
  } else {
    std::vector<complexd> q1(n), q2(n);
    double prev_update = 0.0;
    const int cap = 200;
    bool done = false;
    for (int it = 0; it < cap && !done; ++it) {
      for (int i = 0; i < n; ++i) q1[i] = g.r[i] * uz[i] * uz[i] * hs.p[i];
      const auto inner_int = anchored_integral(g, q1, irc);
      for (int i = 0; i < n; ++i)
        q2[i] = inner_int[i] / (g.r[i] * g.r[i] * g.r[i] * uz[i] * uz[i]);
      const auto C2 = anchored_integral(g, q2, irc);
      const double kk = static_cast<double>(ak) * ak - 1.0;
      double update = 0.0, pnorm = 0.0;
      for (int i = 0; i < n; ++i) {
        const complexd pn = 1.0 + kk * C2[i];
        update = std::max(update, std::abs(pn - hs.p[i]) / env[i]);
        pnorm = std::max(pnorm, std::abs(pn) / env[i]);
        hs.p[i] = pn;
      }
      hs.iterations = it + 1;
      if (prev_update > 0.0) hs.contraction = update / prev_update;
      prev_update = update;
      if (update <= 1e-13 * std::max(1.0, pnorm)) done = true;
    }
    hs.converged = done;
    if (!done)
      throw std::runtime_error(
          "fixed-point iteration for the homogeneous solution did not converge "
          "in 200 sweeps (contraction factor should make this impossible)");
  }

  hs.phi.resize(n);
  for (int i = 0; i < n; ++i)
    hs.phi[i] = std::pow(g.r[i] / rc, 1.5) * uz[i] * hs.p[i];
  return hs;
}

// ---------------------------------------------------------------------------
// Green's function data by reduction of order.  With I0 = int_0^r phi^-2 and
// Iinf = int_r^inf phi^-2 (closed-form head and tail corrections for the mass
// outside the grid),
//
//   H0 = -phi I0,   Hinf = phi Iinf,   M = W(H0, Hinf) = I0 + Iinf,
//
// independent of r.  For |k| = 1 the left integral diverges (phi is already
// the regular branch), and the correct pair is H0 = phi, M = -1.
// ---------------------------------------------------------------------------

struct GreensData {
  HomogeneousSolution hom;
  std::vector<complexd> H0, Hinf;
  complexd M{0.0, 0.0};
  // |M| collapsing to zero would mean an embedded eigenvalue; the operator has
  // none, so this flags a numerical problem with the solve.
  bool near_eigenvalue = false;
};

inline GreensData build_greens(HomogeneousSolution hom) {
  GreensData gd{std::move(hom), {}, {}, complexd{0.0, 0.0}, false};
  const RadialGrid& g = *gd.hom.sg.grid;
  const int n = g.size();
  const int ak = std::abs(gd.hom.k);
  const auto& phi = gd.hom.phi;

  std::vector<complexd> inv2(n);
  for (int i = 0; i < n; ++i) inv2[i] = 1.0 / (phi[i] * phi[i]);

  // power-law tails of phi^{-2}: ~ r^{2k-1} at the origin, ~ r^{-2k-1} outward
  const complexd head = ak >= 2 ? inv2.front() * g.r_min() / (2.0 * ak)
                                : complexd{0.0, 0.0};
  const complexd tail = inv2.back() * g.r_max() / (2.0 * ak);

  const auto I0 = prefix_integral(g, inv2);
  const auto Iinf = suffix_integral(g, inv2);

  gd.H0.resize(n);
  gd.Hinf.resize(n);
  for (int i = 0; i < n; ++i) gd.Hinf[i] = phi[i] * (Iinf[i] + tail);
  if (ak == 1) {
    for (int i = 0; i < n; ++i) gd.H0[i] = phi[i];
    gd.M = complexd{-1.0, 0.0};
  } else {
    for (int i = 0; i < n; ++i) gd.H0[i] = -phi[i] * (I0[i] + head);
    gd.M = I0.back() + head + tail;  // I0 + Iinf at the outer end
  }
  gd.near_eigenvalue = std::abs(gd.M) < 1e-14;
  return gd;
}

// Apply the Green's function to a right-hand side sampled on the solver grid.
inline std::vector<complexd> greens_apply(const GreensData& gd,
                                          const std::vector<complexd>& rhs) {
  const RadialGrid& g = *gd.hom.sg.grid;
  const int n = g.size();
  if (static_cast<int>(rhs.size()) != n)
    throw std::invalid_argument("greens_apply: rhs size mismatch");
  std::vector<complexd> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    a[i] = gd.H0[i] * rhs[i];
    b[i] = gd.Hinf[i] * rhs[i];
  }
  const auto pre = prefix_integral(g, a);
  const auto suf = suffix_integral(g, b);
  std::vector<complexd> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = (gd.Hinf[i] * pre[i] + gd.H0[i] * suf[i]) / gd.M;
  return out;
}

// ---------------------------------------------------------------------------
// Near-origin structure of the data: omega ~ omega_k0 r^k with a smooth even
// correction; omega_k0 is extracted by Richardson extrapolation of omega/r^k
// in the variable r^2, cross-checked with a shifted stencil.
//
//   F = omega sqrt(r) - (beta/beta(0)) chi(r) r^{k+1/2} omega_k0
//
// vanishes to higher order at the origin; F_star is the cutoff commutator
// source that the shifted unknown leaves behind.
// ---------------------------------------------------------------------------

struct YDecomposition {
  complexd omega_k0{0.0, 0.0};
  ModeField F;
  ModeField F_star;
  double mismatch = 0.0;
};

inline YDecomposition y_decomposition(const RadialVortex& vort,
                                      const ModeField& omega) {
  const RadialGrid& g = *omega.grid;
  const int k = omega.k, ak = std::abs(omega.k);
  if (ak == 0) throw std::invalid_argument("k must be a nonzero integer");

  // omega/r^k at the first five nodes, extrapolated to r = 0 quadratically
  // in t = r^2 from nodes {0,1,2} and {1,2,3}.
  auto extrap = [&](int off) {
    double t[3];
    complexd y[3];
    for (int j = 0; j < 3; ++j) {
      const double r = g.r[off + j];
      t[j] = r * r;
      y[j] = omega.v[off + j] / std::pow(r, ak);
    }
    complexd acc{0.0, 0.0};
    for (int j = 0; j < 3; ++j) {
      double L = 1.0;
      for (int m = 0; m < 3; ++m)
        if (m != j) L *= t[m] / (t[m] - t[j]);
      acc += L * y[j];
    }
    return acc;
  };
  const complexd a0 = extrap(0), a1 = extrap(1);
  double ymax = 0.0;
  for (int j = 0; j < 4; ++j)
    ymax = std::max(ymax, std::abs(omega.v[j] / std::pow(g.r[j], ak)));
  const double scale = std::max({std::abs(a0), std::abs(a1), 1e-300});
  YDecomposition out;
  out.mismatch = std::abs(a0 - a1);
  if (out.mismatch > 1e-3 * std::max(scale, 1e-12 * ymax) && ymax > 0.0)
    throw std::runtime_error(
        "omega/r^k does not converge at the origin "
        "(expected smooth expansion a0 + a1 r^2 + ...)");
  out.omega_k0 = a0;

  out.F = ModeField(k, omega.grid);
  out.F_star = ModeField(k, omega.grid);
  const double b0 = vort.beta0;
  for (int i = 0; i < g.size(); ++i) {
    const double r = g.r[i];
    const double chi = smooth_cutoff(r);
    out.F.v[i] = omega.v[i] * std::sqrt(r) -
                 (vort.beta(r) / b0) * chi * std::pow(r, ak + 0.5) * out.omega_k0;
    const double c1 = smooth_cutoff_d1(r), c2 = smooth_cutoff_d2(r);
    out.F_star.v[i] = -(out.omega_k0 / b0) *
                      ((2.0 * ak + 1.0) * c1 * std::pow(r, ak - 0.5) +
                       c2 * std::pow(r, ak + 0.5));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inhomogeneous solve on the base grid.
// ---------------------------------------------------------------------------

struct RayleighSolution {
  ModeField Phi;       // on the base grid
  ModeField Y;         // Phi minus the cutoff harmonic piece at the origin
  complexd omega_k0{0.0, 0.0};
  complexd z{0.0, 0.0};
  std::string path;    // "greens" or "bvp"
  double residual = 0.0;
  double condition = 0.0;
  bool warn = false;
  std::shared_ptr<GreensData> greens;      // set on the greens path
  std::vector<complexd> phi_solver;        // homogeneous solution, solver grid
};

namespace detail {

// Masked relative residual of Ray_z Phi = rhs, skipping the critical layer
// (|u - Re z| <= 3 eps, where a grid-scale finite difference cannot probe the
// operator meaningfully) and a few end nodes.
inline double rayleigh_residual(const RadialGrid& g, const RadialVortex& vort,
                                int k, complexd z,
                                const std::vector<complexd>& Phi,
                                const std::vector<complexd>& rhs) {
  const int n = g.size();
  const auto d2 = derivative_samples(g, Phi, 2, 5);
  const double eps = std::abs(z.imag());
  double num = 0.0, den = 0.0;
  for (int i = 3; i < n - 3; ++i) {
    const double r = g.r[i];
    if (std::abs(vort.u(r) - z.real()) <= 3.0 * eps) continue;
    const complexd pot =
        complexd{(0.25 - static_cast<double>(k) * k) / (r * r), 0.0} +
        vort.beta(r) / (complexd{vort.u(r), 0.0} - z);
    const complexd res = d2[i] + pot * Phi[i] - rhs[i];
    num += std::norm(res) * g.w[i];
    den += std::norm(rhs[i]) * g.w[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

}  // namespace detail

inline RayleighSolution solve_rayleigh(const RadialVortex& vort,
                                       const ModeField& omega, complexd z,
                                       const std::string& path = "auto") {
  const RadialGrid& base = *omega.grid;
  const int k = omega.k;
  const double eps = std::abs(z.imag());
  if (eps < kEpsFloor)
    throw std::invalid_argument(
        "eps below the supported floor 1e-5: critical layer would be unresolvable");

  const double c = z.real();
  double rc = std::numeric_limits<double>::quiet_NaN();
  if (c > 0.0 && c < vort.u0) rc = vort.critical_radius(c);
  const bool greens_feasible =
      !std::isnan(rc) && rc > 4.0 * base.r_min() && rc < 0.25 * base.r_max();

  bool use_greens;
  if (path == "greens") {
    use_greens = true;
  } else if (path == "bvp") {
    use_greens = false;
  } else if (path == "auto") {
    use_greens = greens_feasible;
  } else {
    throw std::invalid_argument("solve_rayleigh: unknown path " + path);
  }

  RayleighSolution out;
  out.z = z;
  out.Phi = ModeField(k, omega.grid);

  const auto attach_y = [&](RayleighSolution& sol) {
    sol.Y = ModeField(k, omega.grid);
    try {
      sol.omega_k0 = y_decomposition(vort, omega).omega_k0;
    } catch (const std::exception&) {
      sol.omega_k0 = complexd{0.0, 0.0};  // data has no clean r^k expansion
    }
    const int ak = std::abs(k);
    for (int i = 0; i < base.size(); ++i) {
      const double r = base.r[i];
      sol.Y.v[i] = sol.Phi.v[i] - smooth_cutoff(r) * std::pow(r, ak + 0.5) *
                                      sol.omega_k0 / vort.beta0;
    }
  };

  const auto run_greens = [&](RayleighSolution& sol) {
    auto gd = std::make_shared<GreensData>(build_greens(homogeneous_phi(vort, k, z, base)));
    const RadialGrid& sgrid = *gd->hom.sg.grid;
    const int ns = sgrid.size();
    std::vector<complexd> rhs(ns);
    for (int i = 0; i < ns; ++i) {
      const double x = sgrid.r[i];
      const complexd om = interp_at(base, omega.v, x);
      rhs[i] = om * std::sqrt(x) / (complexd{vort.u(x), 0.0} - z);
    }
    const auto Phi_solver = greens_apply(*gd, rhs);
    for (int i = 0; i < base.size(); ++i)
      sol.Phi.v[i] = interp_at(sgrid, Phi_solver, base.r[i]);
    sol.path = "greens";
    sol.residual = detail::rayleigh_residual(sgrid, vort, k, z, Phi_solver, rhs);
    sol.warn = !gd->hom.converged || gd->near_eigenvalue;
    sol.phi_solver = gd->hom.phi;
    sol.greens = std::move(gd);
  };

  if (use_greens) {
    run_greens(out);
    attach_y(out);
    return out;
  }

  // Boundary value path: second-order differences on the base grid.  The
  // boundary rows impose the decaying power laws Phi ~ r^{k+1/2} at the
  // origin and r^{1/2-k} outward (plain Dirichlet zeros would inject an O(1)
  // error at r_max for slowly decaying tails).
  const int n = base.size();
  const double ak = std::abs(k);
  std::vector<complexd> sub(n, complexd{0.0, 0.0}), diag(n, complexd{0.0, 0.0}),
      sup(n, complexd{0.0, 0.0}), rhs(n, complexd{0.0, 0.0});
  diag[0] = complexd{1.0, 0.0};
  sup[0] = complexd{-std::pow(base.r[0] / base.r[1], ak + 0.5), 0.0};
  diag[n - 1] = complexd{1.0, 0.0};
  sub[n - 1] = complexd{-std::pow(base.r[n - 2] / base.r[n - 1], ak - 0.5), 0.0};
  for (int i = 1; i + 1 < n; ++i) {
    const double hm = base.r[i] - base.r[i - 1], hp = base.r[i + 1] - base.r[i];
    const double r = base.r[i];
    sub[i] = 2.0 / (hm * (hm + hp));
    sup[i] = 2.0 / (hp * (hm + hp));
    diag[i] = complexd{-2.0 / (hm * hp) +
                           (0.25 - static_cast<double>(k) * k) / (r * r),
                       0.0} +
              vort.beta(r) / (complexd{vort.u(r), 0.0} - z);
    rhs[i] = omega.v[i] * std::sqrt(r) / (complexd{vort.u(r), 0.0} - z);
    // equilibrate: row magnitudes span ~r^-2 across the grid, which would
    // otherwise swamp the max-entry/min-pivot conditioning estimate
    const double s = std::max({std::abs(sub[i]), std::abs(diag[i]), std::abs(sup[i])});
    sub[i] /= s;
    diag[i] /= s;
    sup[i] /= s;
    rhs[i] /= s;
  }
  std::vector<complexd> sol = rhs;
  out.condition = solve_tridiagonal(sub, diag, sup, sol);
  if (!(out.condition < 1e12) && greens_feasible) {
    run_greens(out);
    out.warn = true;
    attach_y(out);
    return out;
  }
  out.Phi.v = sol;
  out.path = "bvp";
  std::vector<complexd> rhs_full(n);
  for (int i = 0; i < n; ++i) {
    const double r = base.r[i];
    rhs_full[i] = omega.v[i] * std::sqrt(r) / (complexd{vort.u(r), 0.0} - z);
  }
  out.residual = detail::rayleigh_residual(base, vort, k, z, out.Phi.v, rhs_full);
  out.warn = !(out.condition < 1e12);
  attach_y(out);
  return out;
}

}  // namespace vortexlab
