#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "vortexlab/evolution.hpp"
#include "vortexlab/grid.hpp"
#include "vortexlab/math_util.hpp"
#include "vortexlab/rayleigh.hpp"
#include "vortexlab/vortex.hpp"
#include "vortexlab/weights.hpp"

namespace vortexlab {

// ---------------------------------------------------------------------------
// Spectral reconstruction of the evolution.  With Phi(r, c +- i eps) the
// resolvent solutions along a contour hugging the real axis,
//
//   omega(t, r) = e^{-i k t u} omega_in
//     - beta/(2 pi i sqrt(r)) int e^{-i k c t}
//         [ (u - c) X + i eps S ] / ((u - c)^2 + eps^2) dc,
//
// where X = Phi+ - Phi- and S = Phi+ + Phi-.  (The sign of the correction
// follows from Stone's formula with Delta Phi~ = -(z - L)^{-1} omega_in for
// the inhomogeneous Rayleigh solution normalized by rhs = omega sqrt(r)/(u-z);
// the streamfunction picks up 1/(2 pi i sqrt(r)) with no beta.)
// The c-integral is evaluated by
// product integration: X and S are taken piecewise linear between contour
// nodes while the sharp kernels are integrated in closed form per panel, so
// a layer of width eps costs no resolution.
// ---------------------------------------------------------------------------

struct ContourOptions {
  double eps = 1e-3;
  double alpha = 0.05;    // exponent in the layer-window cutoff
  double R_delta = 1.0;   // left reach of the shoulder segment
  double far_pad = 6.0;   // reach of the far segments beyond the shoulders
  double t_max = 5.0;     // largest evaluation time the plan must support
  int min_spectrum_nodes = 96;
  std::string path = "auto";
};

// chi_sigma: 1 on [-R_delta/2, u0 + 1/2], 0 outside (-R_delta, u0 + 3/4).
inline double spectral_cutoff(double c, double R_delta, double u0) {
  if (c <= -R_delta || c >= u0 + 0.75) return 0.0;
  if (c < -0.5 * R_delta) {
    const double s = (c + R_delta) / (0.5 * R_delta);
    return smooth_cutoff(0.75 - 0.25 * s);
  }
  if (c > u0 + 0.5) {
    const double s = (c - u0 - 0.5) / 0.25;
    return smooth_cutoff(0.5 + 0.25 * s);
  }
  return 1.0;
}

// chi_I: keeps critical radii in the window between (k^5 eps)^{1/(2+alpha)}
// and its reciprocal.
inline double layer_window(int k, double eps, double alpha, double r_c) {
  const double s = std::pow(std::abs(k) * std::abs(k) * std::abs(k) *
                                std::abs(k) * std::abs(k) * eps,
                            1.0 / (2.0 + alpha));
  return smooth_cutoff(r_c * s) * (1.0 - smooth_cutoff(r_c / s));
}

struct ContourPlan {
  int k = 1;
  double u0 = 0.0;
  ContourOptions opt;
  std::vector<double> cs;     // node abscissae, strictly increasing
  std::vector<double> r_c;    // critical radius per node (NaN off-spectrum)
  std::vector<double> chi_I;  // layer window at each node
  std::vector<double> chi_S;  // spectral cutoff at each node
  double c_lo = 0.0, c_hi = 0.0;
  bool region_iii_empty = false;
};

inline ContourPlan build_contour_plan(const RadialVortex& vort, int k,
                                      const ContourOptions& opt) {
  if (k == 0) throw std::invalid_argument("k must be a nonzero integer");
  if (opt.eps < kEpsFloor)
    throw std::invalid_argument(
        "eps below the supported floor 1e-5: critical layer would be unresolvable");
  ContourPlan plan;
  plan.k = k;
  plan.u0 = vort.u0;
  plan.opt = opt;
  const double u0 = vort.u0;
  const double kt = std::max(1.0, std::abs(k) * opt.t_max);

  auto fill = [&](double lo, double hi, int count) {
    for (int j = 0; j < count; ++j)
      plan.cs.push_back(lo + (hi - lo) * (j + 0.5) / count);
  };

  // oscillation e^{-i k c t} must stay resolved: dc <= pi/(8 kt) on the
  // segments that matter, pi/(4 kt) on the far wings
  const double dc_fine = kPi / (8.0 * kt), dc_far = kPi / (4.0 * kt);
  plan.c_lo = -opt.R_delta - opt.far_pad;
  plan.c_hi = u0 + 1.0 + opt.far_pad;

  fill(plan.c_lo, -opt.R_delta,
       std::max(16, static_cast<int>(std::ceil(opt.far_pad / dc_far))));
  fill(-opt.R_delta, 0.0,
       std::max(24, static_cast<int>(std::ceil(opt.R_delta / dc_fine))));
  fill(0.0, u0,
       std::max(opt.min_spectrum_nodes,
                static_cast<int>(std::ceil(u0 / dc_fine))));
  fill(u0, u0 + 1.0,
       std::max(24, static_cast<int>(std::ceil(1.0 / dc_fine))));
  fill(u0 + 1.0, plan.c_hi,
       std::max(16, static_cast<int>(std::ceil(opt.far_pad / dc_far))));

  const int nc = static_cast<int>(plan.cs.size());
  plan.r_c.assign(nc, std::numeric_limits<double>::quiet_NaN());
  plan.chi_I.assign(nc, 0.0);
  plan.chi_S.assign(nc, 0.0);
  double max_window = 0.0;
  for (int j = 0; j < nc; ++j) {
    const double c = plan.cs[j];
    plan.chi_S[j] = spectral_cutoff(c, opt.R_delta, u0);
    if (c > 0.0 && c < u0) {
      plan.r_c[j] = vort.critical_radius(c);
      plan.chi_I[j] = layer_window(k, opt.eps, opt.alpha, plan.r_c[j]);
      max_window = std::max(max_window, plan.chi_I[j]);
    }
  }
  plan.region_iii_empty = max_window < 1e-6;
  return plan;
}

// ---------------------------------------------------------------------------
// Closed-form panel moments of the layer kernels against 1 and c:
//   delta kernel  eps / ((c-u)^2 + eps^2)
//   pv kernel     (u-c) / ((c-u)^2 + eps^2)
// ---------------------------------------------------------------------------

struct KernelMoments {
  double d0, d1, p0, p1;
};

inline KernelMoments kernel_moments(double a, double b, double u, double eps) {
  KernelMoments m;
  const double x = (b - u) / eps, y = (a - u) / eps;
  m.d0 = std::atan2(x - y, 1.0 + x * y);  // atan(x) - atan(y), right branch
  const double Da = (a - u) * (a - u) + eps * eps;
  const double Db = (b - u) * (b - u) + eps * eps;
  m.d1 = u * m.d0 + 0.5 * eps * std::log(Db / Da);
  m.p0 = 0.5 * std::log(Da / Db);
  m.p1 = u * m.p0 - (b - a) + eps * m.d0;
  return m;
}

// int_a^b V(c) kern(c) dc with V linear from Va to Vb.
inline complexd linear_moment(double a, double b, complexd Va, complexd Vb,
                              double K0, double K1) {
  return Va * K0 + (Vb - Va) / (b - a) * (K1 - a * K0);
}

// ---------------------------------------------------------------------------
// Resolvent solves along the contour.
// ---------------------------------------------------------------------------

struct ContourNodeData {
  std::vector<complexd> X, S;  // Phi+ - Phi-, Phi+ + Phi- on the base grid
};

struct ContourSolveCache {
  ContourPlan plan;
  std::shared_ptr<const RadialGrid> grid;
  std::vector<ContourNodeData> nodes;
  double max_residual = 0.0;
  int greens_solves = 0, bvp_solves = 0;
  bool warn = false;
};

inline ContourSolveCache solve_contour_nodes(const RadialVortex& vort,
                                             const ModeField& omega_in,
                                             const ContourPlan& plan,
                                             int threads = 1) {
  if (omega_in.k != plan.k)
    throw std::invalid_argument("plan and data disagree on the mode number");
  ContourSolveCache cache;
  cache.plan = plan;
  cache.grid = omega_in.grid;
  const int nc = static_cast<int>(plan.cs.size());
  cache.nodes.resize(nc);
  std::vector<double> residuals(nc, 0.0);
  std::vector<char> warns(nc, 0), greens(nc, 0);
  std::vector<std::string> errors(nc);

  auto work = [&](int j) {
    const complexd zp{plan.cs[j], plan.opt.eps};
    const complexd zm{plan.cs[j], -plan.opt.eps};
    const auto sp = solve_rayleigh(vort, omega_in, zp, plan.opt.path);
    const auto sm = solve_rayleigh(vort, omega_in, zm, plan.opt.path);
    residuals[j] = std::max(sp.residual, sm.residual);
    warns[j] = sp.warn || sm.warn;
    greens[j] = sp.path == "greens";
    const int n = omega_in.grid->size();
    cache.nodes[j].X.resize(n);
    cache.nodes[j].S.resize(n);
    for (int i = 0; i < n; ++i) {
      cache.nodes[j].X[i] = sp.Phi.v[i] - sm.Phi.v[i];
      cache.nodes[j].S[i] = sp.Phi.v[i] + sm.Phi.v[i];
    }
  };

  threads = std::clamp(threads, 1, nc);
  if (threads == 1) {
    for (int j = 0; j < nc; ++j) work(j);
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < threads; ++w) {
      pool.emplace_back([&]() {
        for (int j = next++; j < nc; j = next++) {
          try {
            work(j);
          } catch (const std::exception& e) {
            errors[j] = e.what();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
    for (int j = 0; j < nc; ++j)
      if (!errors[j].empty()) throw std::runtime_error(errors[j]);
  }

  for (int j = 0; j < nc; ++j) {
    cache.max_residual = std::max(cache.max_residual, residuals[j]);
    cache.warn = cache.warn || warns[j];
    if (greens[j]) cache.greens_solves += 2;
    else cache.bvp_solves += 2;
  }
  return cache;
}

// ---------------------------------------------------------------------------
// Vorticity and streamfunction at time t from the cached solves.
// ---------------------------------------------------------------------------

inline EvolutionState contour_state(const RadialVortex& vort,
                                    const ModeField& omega_in,
                                    const ContourSolveCache& cache, double t) {
  const ContourPlan& plan = cache.plan;
  const RadialGrid& g = *omega_in.grid;
  const int n = g.size();
  const int nc = static_cast<int>(plan.cs.size());
  const int k = plan.k;
  const double eps = plan.opt.eps;

  if (t > plan.opt.t_max * (1.0 + 1e-12)) {
    std::ostringstream msg;
    msg << "contour plan resolved up to t = " << plan.opt.t_max
        << " but state requested at t = " << t
        << "; rebuild the plan with t_max >= " << t
        << " (spectrum spacing dc <= " << kPi / (8.0 * k * t) << ")";
    throw std::runtime_error(msg.str());
  }

  EvolutionState st;
  st.t = t;
  st.omega = ModeField(k, omega_in.grid);
  st.psi = ModeField(k, omega_in.grid);

  std::vector<complexd> phase(nc);
  for (int j = 0; j < nc; ++j) phase[j] = std::polar(1.0, -k * t * plan.cs[j]);

  for (int i = 0; i < n; ++i) {
    const double r = g.r[i];
    const double u = vort.u(r);
    const double beta = vort.beta(r);
    complexd bracket{0.0, 0.0};
    complexd stream{0.0, 0.0};
    auto add_panel = [&](double a, double b, complexd VXa, complexd VXb,
                         complexd VSa, complexd VSb) {
      const auto m = kernel_moments(a, b, u, eps);
      bracket += linear_moment(a, b, VXa, VXb, m.p0, m.p1);
      bracket += complexd{0.0, 1.0} * linear_moment(a, b, VSa, VSb, m.d0, m.d1);
      // streamfunction kernel is just e^{-ikct}, already folded into V
      stream += linear_moment(a, b, VXa, VXb, b - a, 0.5 * (b * b - a * a));
    };
    // end caps with V held constant
    {
      const complexd VX0 = cache.nodes[0].X[i] * phase[0];
      const complexd VS0 = cache.nodes[0].S[i] * phase[0];
      add_panel(plan.c_lo, plan.cs[0], VX0, VX0, VS0, VS0);
      const complexd VXn = cache.nodes[nc - 1].X[i] * phase[nc - 1];
      const complexd VSn = cache.nodes[nc - 1].S[i] * phase[nc - 1];
      add_panel(plan.cs[nc - 1], plan.c_hi, VXn, VXn, VSn, VSn);
    }
    for (int j = 0; j + 1 < nc; ++j) {
      add_panel(plan.cs[j], plan.cs[j + 1],
                cache.nodes[j].X[i] * phase[j],
                cache.nodes[j + 1].X[i] * phase[j + 1],
                cache.nodes[j].S[i] * phase[j],
                cache.nodes[j + 1].S[i] * phase[j + 1]);
    }
    const complexd pref = beta / (complexd{0.0, 2.0 * kPi} * std::sqrt(r));
    st.omega.v[i] =
        std::polar(1.0, -k * t * u) * omega_in.v[i] - pref * bracket;
    st.psi.v[i] = -stream / (complexd{0.0, 2.0 * kPi} * std::sqrt(r));
  }

  st.beta_norm = beta_norm(vort, st.omega);
  st.momentum = radial_moment(st.omega);
  return st;
}

inline std::vector<EvolutionState> evolve_contour(const RadialVortex& vort,
                                                  const ModeField& omega_in,
                                                  const ContourSolveCache& cache,
                                                  const std::vector<double>& ts) {
  std::vector<EvolutionState> out;
  out.reserve(ts.size());
  for (double t : ts) out.push_back(contour_state(vort, omega_in, cache, t));
  return out;
}

// ---------------------------------------------------------------------------
// Four-piece split of the profile f = e^{i k u t} omega(t).  The pieces
// partition the contour integrand through the cutoffs: the layer window
// chi_I splits off the near-diagonal region (further divided into the
// depleted piece f1 and the transient f2 by chi(r/2) chi(r/r_c)), the
// spectral cutoff chi_sigma isolates the rest of the spectrum (fS), and the
// remainder far from the spectrum is fE.  By construction
// f1 + f2 + fS + fE equals the reconstructed profile when omega_k0 = 0;
// otherwise they differ by the finite-eps smearing of the shift term.
// ---------------------------------------------------------------------------

struct FDecomposition {
  double t = 0.0;
  double eps = 0.0;
  ModeField f1, f2, fS, fE;
  double norm_f1 = 0.0, norm_f2 = 0.0, norm_fS = 0.0, norm_fE = 0.0;
  complexd omega_k0{0.0, 0.0};
  bool region_iii_empty = false;
};

inline FDecomposition decompose_f(const RadialVortex& vort,
                                  const ModeField& omega_in,
                                  const ContourSolveCache& cache, double t,
                                  double norm_delta = 0.1) {
  const ContourPlan& plan = cache.plan;
  const RadialGrid& g = *omega_in.grid;
  const int n = g.size();
  const int nc = static_cast<int>(plan.cs.size());
  const int k = plan.k, ak = std::abs(plan.k);
  const double eps = plan.opt.eps;

  const auto yd = y_decomposition(vort, omega_in);

  FDecomposition out;
  out.t = t;
  out.eps = eps;
  out.omega_k0 = yd.omega_k0;
  out.region_iii_empty = plan.region_iii_empty;
  out.f1 = ModeField(k, omega_in.grid);
  out.f2 = ModeField(k, omega_in.grid);
  out.fS = ModeField(k, omega_in.grid);
  out.fE = ModeField(k, omega_in.grid);

  std::vector<complexd> phase(nc);
  for (int j = 0; j < nc; ++j) phase[j] = std::polar(1.0, -k * t * plan.cs[j]);

  for (int i = 0; i < n; ++i) {
    const double r = g.r[i];
    const double u = vort.u(r);
    const double beta = vort.beta(r);
    const double sqr = std::sqrt(r);
    const complexd h = smooth_cutoff(r) * std::pow(r, ak + 0.5) *
                       yd.omega_k0 / vort.beta0;
    const double chi_r2 = smooth_cutoff(0.5 * r);

    complexd acc_f1_delta{}, acc_f1_pv{}, acc_f2{}, acc_fS{}, acc_fE{};

    // per-node V factors for each piece
    auto node_vals = [&](int j, complexd& vI_A, complexd& v1_X, complexd& v2_X,
                         complexd& vS_X, complexd& vS_A, complexd& vE_X,
                         complexd& vE_A) {
      const complexd X = cache.nodes[j].X[i] * phase[j];
      const complexd A = (cache.nodes[j].S[i] - 2.0 * h) * phase[j];
      const double cI = plan.chi_I[j];
      double c1 = 0.0, c2 = 0.0;
      if (cI > 0.0) {
        const double inner = chi_r2 * smooth_cutoff(r / plan.r_c[j]);
        c1 = (1.0 - inner) * cI;
        c2 = inner * cI;
      }
      const double cS = plan.chi_S[j] * (1.0 - cI);
      const double cE = 1.0 - plan.chi_S[j];
      vI_A = cI * A;
      v1_X = c1 * X;
      v2_X = c2 * X;
      vS_X = cS * X;
      vS_A = cS * A;
      vE_X = cE * X;
      vE_A = cE * A;
    };

    complexd aI_A, a1_X, a2_X, aS_X, aS_A, aE_X, aE_A;
    complexd bI_A, b1_X, b2_X, bS_X, bS_A, bE_X, bE_A;
    node_vals(0, aI_A, a1_X, a2_X, aS_X, aS_A, aE_X, aE_A);

    // end caps (chi_I = 0 there; only fS/fE kernels see them)
    {
      const auto m = kernel_moments(plan.c_lo, plan.cs[0], u, eps);
      acc_fS += linear_moment(plan.c_lo, plan.cs[0], aS_X, aS_X, m.p0, m.p1) +
                complexd{0.0, 1.0} *
                    linear_moment(plan.c_lo, plan.cs[0], aS_A, aS_A, m.d0, m.d1);
      acc_fE += linear_moment(plan.c_lo, plan.cs[0], aE_X, aE_X, m.p0, m.p1) +
                complexd{0.0, 1.0} *
                    linear_moment(plan.c_lo, plan.cs[0], aE_A, aE_A, m.d0, m.d1);
    }

    for (int j = 0; j + 1 < nc; ++j) {
      node_vals(j + 1, bI_A, b1_X, b2_X, bS_X, bS_A, bE_X, bE_A);
      const double a = plan.cs[j], b = plan.cs[j + 1];
      const auto m = kernel_moments(a, b, u, eps);
      acc_f1_delta += linear_moment(a, b, aI_A, bI_A, m.d0, m.d1);
      acc_f1_pv += linear_moment(a, b, a1_X, b1_X, m.p0, m.p1);
      acc_f2 += linear_moment(a, b, a2_X, b2_X, m.p0, m.p1);
      acc_fS += linear_moment(a, b, aS_X, bS_X, m.p0, m.p1) +
                complexd{0.0, 1.0} * linear_moment(a, b, aS_A, bS_A, m.d0, m.d1);
      acc_fE += linear_moment(a, b, aE_X, bE_X, m.p0, m.p1) +
                complexd{0.0, 1.0} * linear_moment(a, b, aE_A, bE_A, m.d0, m.d1);
      aI_A = bI_A; a1_X = b1_X; a2_X = b2_X;
      aS_X = bS_X; aS_A = bS_A; aE_X = bE_X; aE_A = bE_A;
    }

    {
      const auto m = kernel_moments(plan.cs[nc - 1], plan.c_hi, u, eps);
      acc_fS += linear_moment(plan.cs[nc - 1], plan.c_hi, aS_X, aS_X, m.p0, m.p1) +
                complexd{0.0, 1.0} * linear_moment(plan.cs[nc - 1], plan.c_hi,
                                                   aS_A, aS_A, m.d0, m.d1);
      acc_fE += linear_moment(plan.cs[nc - 1], plan.c_hi, aE_X, aE_X, m.p0, m.p1) +
                complexd{0.0, 1.0} * linear_moment(plan.cs[nc - 1], plan.c_hi,
                                                   aE_A, aE_A, m.d0, m.d1);
    }

    const complexd ph_u = std::polar(1.0, k * t * u);
    const complexd pref = beta / (complexd{0.0, 2.0 * kPi} * sqr);
    out.f1.v[i] = yd.F.v[i] / sqr -
                  ph_u * (beta / (2.0 * kPi * sqr)) * acc_f1_delta -
                  ph_u * pref * acc_f1_pv;
    out.f2.v[i] = -ph_u * pref * acc_f2;
    out.fS.v[i] = -ph_u * pref * acc_fS;
    out.fE.v[i] = -ph_u * pref * acc_fE;
  }

  const WeightSpec spec{WeightFamily::f, norm_delta};
  out.norm_f1 = weighted_norm(out.f1, spec);
  out.norm_f2 = weighted_norm(out.f2, spec);
  out.norm_fS = weighted_norm(out.fS, spec);
  out.norm_fE = weighted_norm(out.fE, spec);
  return out;
}

}  // namespace vortexlab
