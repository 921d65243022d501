#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vortexlab/grid.hpp"
#include "vortexlab/math_util.hpp"

namespace vortexlab {

// ---------------------------------------------------------------------------
// Radially symmetric base vortex.  Profiles are supplied as callables so the
// analytic family and the tabulated one share every consumer.  All consumers
// rely on: omega > 0, strictly decreasing; u(r) = r^-2 int_0^r omega(s) s ds;
// beta = -omega'/r > 0; and the structural identity beta + u'' + 3 u'/r = 0.
// ---------------------------------------------------------------------------

struct RadialVortex {
  std::function<double(double)> omega;   // angular vorticity profile
  std::function<double(double)> domega;  // d omega / dr
  std::function<double(double)> u;       // angular velocity u = psi'/r form
  std::function<double(double)> du;
  std::function<double(double)> d2u;
  std::function<double(double)> d3u;
  std::function<double(double)> beta;    // -omega'/r
  std::function<double(double)> dbeta;
  double u0 = 0.0;           // u(0+)
  double beta0 = 0.0;        // beta(0+)
  double circulation = 0.0;  // int_0^inf omega(s) s ds = lim r^2 u
  std::string family;

  // Unique r with u(r) = c, for 0 < c < u0.  u is strictly decreasing.
  double critical_radius(double c) const {
    if (!(c > 0.0) || !(c < u0))
      throw std::domain_error("critical_radius: c outside (0, u(0))");
    double lo = 1e-12, hi = 1.0;
    while (u(hi) > c) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e12) throw std::runtime_error("critical_radius: bracket failed");
    }
    // Safeguarded Newton from the bisection midpoint.
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double f = u(x) - c;
      if (std::abs(f) <= 1e-14 * u0) break;
      if (f > 0.0)
        lo = x;
      else
        hi = x;
      const double d = du(x);
      double xn = d != 0.0 ? x - f / d : 0.5 * (lo + hi);
      if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
      if (std::abs(xn - x) <= 1e-16 * x) {
        x = xn;
        break;
      }
      x = xn;
    }
    return x;
  }
};

// ---------------------------------------------------------------------------
// Gaussian family: omega = lambda/(4 pi L^2) exp(-r^2 / (4 L^2)).
//
// Closed forms involve (1 - exp(-x))/x-type combinations that cancel badly
// for small x = r^2/(4 L^2), so everything below x = 1 is evaluated by the
// power series of u = C0 sum (-x)^n / (n+1)!  (term-by-term derivatives),
// and above by expm1-based closed forms.
// ---------------------------------------------------------------------------

inline RadialVortex make_gaussian_vortex(double lambda, double L) {
  if (!(lambda > 0.0) || !(L > 0.0))
    throw std::invalid_argument("gaussian vortex: lambda and L must be positive");
  const double C0 = lambda / (8.0 * kPi * L * L);  // u(0)
  const double a = 1.0 / (4.0 * L * L);            // x = a r^2
  const double K = lambda / (2.0 * kPi);
  const double L2 = L * L, L4 = L2 * L2, L6 = L4 * L2;
  constexpr int kTerms = 26;  // |tail| < 1e-19 at x = 1

  auto u_series = [=](double r, int deriv) {
    const double x = a * r * r;
    double acc = 0.0, xn = 1.0, fact = 1.0;  // fact = (n+1)!
    for (int n = 0; n < kTerms; ++n) {
      fact *= (n + 1);
      double term;
      switch (deriv) {
        case 0: term = xn / fact; break;
        case 1: term = n >= 1 ? 2.0 * n * xn / fact : 0.0; break;
        case 2: term = n >= 1 ? 2.0 * n * (2.0 * n - 1.0) * xn / fact : 0.0; break;
        default:
          term = n >= 2 ? 2.0 * n * (2.0 * n - 1.0) * (2.0 * n - 2.0) * xn / fact : 0.0;
      }
      acc += (n % 2 ? -term : term);
      xn *= x;
    }
    // Each x^n carries r^{2n}; dividing by r^deriv restores the derivative
    // series since d/dr brings down factors of 2n/r, 2n(2n-1)/r^2, ...
    switch (deriv) {
      case 0: return C0 * acc;
      case 1: return C0 * acc / r;  // series already holds r^{2n}, one r removed
      case 2: return C0 * acc / (r * r);
      default: return C0 * acc / (r * r * r);
    }
  };

  auto u_fn = [=](double r) {
    if (r <= 0.0) return C0;
    const double x = a * r * r;
    if (x < 1.0) return u_series(r, 0);
    return K * (-std::expm1(-x)) / (r * r);
  };
  auto du_fn = [=](double r) {
    if (r <= 0.0) return 0.0;
    const double x = a * r * r;
    if (x < 1.0) return u_series(r, 1);
    const double P = -std::expm1(-x), E = std::exp(-x);
    return K * (-2.0 * P / (r * r * r) + E / (2.0 * L2 * r));
  };
  auto d2u_fn = [=](double r) {
    if (r <= 0.0) return -C0 * a;  // series n=1 term
    const double x = a * r * r;
    if (x < 1.0) return u_series(r, 2);
    const double P = -std::expm1(-x), E = std::exp(-x);
    return K * (6.0 * P / (r * r * r * r) -
                (3.0 / (2.0 * L2 * r * r) + 1.0 / (4.0 * L4)) * E);
  };
  auto d3u_fn = [=](double r) {
    if (r <= 0.0) return 0.0;
    const double x = a * r * r;
    if (x < 1.0) return u_series(r, 3);
    const double P = -std::expm1(-x), E = std::exp(-x);
    return K * (-24.0 * P / std::pow(r, 5) +
                (6.0 / (L2 * r * r * r) + 3.0 / (4.0 * L4 * r) + r / (8.0 * L6)) * E);
  };
  auto omega_fn = [=](double r) { return 2.0 * C0 * std::exp(-a * r * r); };
  auto domega_fn = [=](double r) { return -2.0 * C0 * a * 2.0 * r * std::exp(-a * r * r); };
  auto beta_fn = [=](double r) { return (C0 / L2) * std::exp(-a * r * r); };
  auto dbeta_fn = [=](double r) { return -(C0 / L2) * 2.0 * a * r * std::exp(-a * r * r); };

  RadialVortex v;
  v.omega = omega_fn;
  v.domega = domega_fn;
  v.u = u_fn;
  v.du = du_fn;
  v.d2u = d2u_fn;
  v.d3u = d3u_fn;
  v.beta = beta_fn;
  v.dbeta = dbeta_fn;
  v.u0 = C0;
  v.beta0 = C0 / L2;
  v.circulation = lambda / (2.0 * kPi);
  v.family = "gaussian";
  return v;
}

// ---------------------------------------------------------------------------
// Tabulated vortex: monotone cubic (Fritsch-Carlson) interpolation of omega
// samples.  u comes from exact integration of the interpolant, u'' and u'''
// from the structural identities so the identity residual vanishes by
// construction; only omega'' (hence beta') is merely piecewise linear.
// ---------------------------------------------------------------------------

namespace detail {

struct MonotoneCubic {
  std::vector<double> x, y, d;  // nodes, values, node derivatives

  static MonotoneCubic build(const std::vector<double>& xs,
                             const std::vector<double>& ys) {
    const int n = static_cast<int>(xs.size());
    if (n < 4) throw std::invalid_argument("tabulated profile: need >= 4 samples");
    for (int i = 1; i < n; ++i)
      if (xs[i] <= xs[i - 1])
        throw std::invalid_argument("tabulated profile: radii must increase");
    MonotoneCubic c;
    c.x = xs;
    c.y = ys;
    c.d.assign(n, 0.0);
    std::vector<double> h(n - 1), s(n - 1);
    for (int i = 0; i < n - 1; ++i) {
      h[i] = xs[i + 1] - xs[i];
      s[i] = (ys[i + 1] - ys[i]) / h[i];
    }
    c.d[0] = s[0];
    c.d[n - 1] = s[n - 2];
    for (int i = 1; i < n - 1; ++i) {
      if (s[i - 1] * s[i] <= 0.0) {
        c.d[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        c.d[i] = (w1 + w2) / (w1 / s[i - 1] + w2 / s[i]);
      }
    }
    return c;
  }

  int interval(double q) const {
    const int n = static_cast<int>(x.size());
    auto it = std::upper_bound(x.begin(), x.end(), q);
    return std::clamp(static_cast<int>(it - x.begin()) - 1, 0, n - 2);
  }

  // value and first two derivatives of the Hermite cubic
  void eval(double q, double& f, double& f1, double& f2) const {
    const int i = interval(q);
    const double h = x[i + 1] - x[i], t = (q - x[i]) / h;
    const double y0 = y[i], y1 = y[i + 1], d0 = d[i] * h, d1 = d[i + 1] * h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
    const double h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t);
    const double h11 = t * t * (t - 1);
    f = h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1;
    const double g00 = 6 * t * (t - 1), g10 = (1 - t) * (1 - 3 * t);
    const double g01 = -g00, g11 = t * (3 * t - 2);
    f1 = (g00 * y0 + g10 * d0 + g01 * y1 + g11 * d1) / h;
    const double q00 = 12 * t - 6, q10 = 6 * t - 4, q01 = -q00, q11 = 6 * t - 2;
    f2 = (q00 * y0 + q10 * d0 + q01 * y1 + q11 * d1) / (h * h);
  }
};

}  // namespace detail

inline RadialVortex make_vortex_from_samples(const std::vector<double>& r_samples,
                                             const std::vector<double>& omega_samples) {
  if (r_samples.size() != omega_samples.size())
    throw std::invalid_argument("tabulated profile: sample count mismatch");
  for (double w : omega_samples)
    if (!(w > 0.0))
      throw std::invalid_argument("tabulated profile: omega must be positive");
  auto spline =
      std::make_shared<detail::MonotoneCubic>(detail::MonotoneCubic::build(r_samples, omega_samples));

  const int n = static_cast<int>(r_samples.size());
  // Cumulative moment I(x_i) = int_0^{x_i} omega(s) s ds, exact per interval
  // (integrand is a quartic; GL3 is exact through degree 5).
  auto cum = std::make_shared<std::vector<double>>(n, 0.0);
  {
    const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    // below the first node omega is held at its first value
    (*cum)[0] = omega_samples[0] * 0.5 * r_samples[0] * r_samples[0];
    for (int i = 0; i < n - 1; ++i) {
      const double a = r_samples[i], b = r_samples[i + 1];
      const double xm = 0.5 * (a + b), xh = 0.5 * (b - a);
      double acc = 0.0;
      for (int q = 0; q < 3; ++q) {
        const double s = xm + xh * gx[q];
        double f, f1, f2;
        spline->eval(s, f, f1, f2);
        acc += xh * gw[q] * f * s;
      }
      (*cum)[i + 1] = (*cum)[i] + acc;
    }
  }
  auto xs = std::make_shared<std::vector<double>>(r_samples);
  const double I_total = cum->back();
  const double r_lo = r_samples.front(), r_hi = r_samples.back();
  const double om0 = omega_samples.front();

  auto moment = [=](double r) {
    if (r <= r_lo) return om0 * 0.5 * r * r;
    if (r >= r_hi) return I_total;
    const int i = spline->interval(r);
    const double gx[3] = {-std::sqrt(0.6), 0.0, std::sqrt(0.6)};
    const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const double a = (*xs)[i];
    const double xm = 0.5 * (a + r), xh = 0.5 * (r - a);
    double acc = (*cum)[i];
    for (int q = 0; q < 3; ++q) {
      const double s = xm + xh * gx[q];
      double f, f1, f2;
      spline->eval(s, f, f1, f2);
      acc += xh * gw[q] * f * s;
    }
    return acc;
  };

  auto omega_fn = [=](double r) {
    if (r <= r_lo) return om0;
    if (r >= r_hi) return 0.0;
    double f, f1, f2;
    spline->eval(r, f, f1, f2);
    return f;
  };
  auto domega_fn = [=](double r) {
    if (r <= r_lo || r >= r_hi) return 0.0;
    double f, f1, f2;
    spline->eval(r, f, f1, f2);
    return f1;
  };
  auto beta_fn = [=](double r) {
    if (r <= r_lo) {
      // beta(0+) limit: use the first interior curvature
      double f, f1, f2;
      spline->eval(r_lo, f, f1, f2);
      return std::max(0.0, -f1 / r_lo);
    }
    if (r >= r_hi) return 0.0;
    double f, f1, f2;
    spline->eval(r, f, f1, f2);
    return -f1 / r;
  };
  auto dbeta_fn = [=](double r) {
    if (r <= r_lo || r >= r_hi) return 0.0;
    double f, f1, f2;
    spline->eval(r, f, f1, f2);
    return (-f2 + f1 / r) / r;
  };
  auto u_fn = [=](double r) {
    if (r <= 0.0) return 0.5 * om0;
    return moment(r) / (r * r);
  };
  auto du_fn = [=](double r) {
    if (r <= 0.0) return 0.0;
    return (omega_fn(r) - 2.0 * u_fn(r)) / r;
  };
  auto d2u_fn = [=](double r) {
    if (r <= 0.0) return 0.0;
    return -beta_fn(r) - 3.0 * du_fn(r) / r;
  };
  auto d3u_fn = [=](double r) {
    if (r <= 0.0) return 0.0;
    return -dbeta_fn(r) - 3.0 * d2u_fn(r) / r + 3.0 * du_fn(r) / (r * r);
  };

  RadialVortex v;
  v.omega = omega_fn;
  v.domega = domega_fn;
  v.u = u_fn;
  v.du = du_fn;
  v.d2u = d2u_fn;
  v.d3u = d3u_fn;
  v.beta = beta_fn;
  v.dbeta = dbeta_fn;
  v.u0 = 0.5 * om0;
  v.beta0 = beta_fn(0.0);
  v.circulation = I_total;
  v.family = "tabulated";
  return v;
}

// ---------------------------------------------------------------------------
// Admissibility checks on a grid: positivity, monotonicity, the structural
// identity, and fast decay (log-log slope of omega at most -6 and of beta at
// most -8 over the outermost decade, so the far-field weights stay finite).
// ---------------------------------------------------------------------------

struct VortexValidation {
  bool ok = true;
  double max_identity_residual = 0.0;
  double omega_tail_slope = 0.0;
  double beta_tail_slope = 0.0;
  std::vector<std::string> violations;
};

inline VortexValidation validate_vortex(const RadialVortex& v, const RadialGrid& g,
                                        double identity_tol = 1e-8) {
  VortexValidation out;
  auto fail = [&](const std::string& msg) {
    out.ok = false;
    out.violations.push_back(msg);
  };

  // Positivity, allowing a trailing run of exact zeros where the profile
  // underflows (e^{-r^2/4} is zero in double precision past r ~ 54).
  auto check_positive = [&](auto&& fn, const char* what) {
    int last_pos = -1;
    for (int i = 0; i < g.size(); ++i)
      if (fn(g.r[i]) > 0.0) last_pos = i;
    for (int i = 0; i < g.size(); ++i) {
      const double val = fn(g.r[i]);
      if (val < 0.0 || (val == 0.0 && i <= last_pos)) {
        fail(std::string(what) + " must be strictly positive on the grid");
        return;
      }
    }
  };
  check_positive([&](double r) { return v.omega(r); }, "omega");
  check_positive([&](double r) { return v.beta(r); }, "beta = -omega'/r");
  check_positive([&](double r) { return -v.du(r); },
                 "-u' (u must be strictly decreasing)");

  for (int i = 0; i < g.size(); ++i) {
    const double r = g.r[i];
    const double res = v.beta(r) + v.d2u(r) + 3.0 * v.du(r) / r;
    const double scale = std::abs(v.beta(r)) + std::abs(v.d2u(r)) +
                         std::abs(3.0 * v.du(r) / r) + v.beta0;
    out.max_identity_residual =
        std::max(out.max_identity_residual, std::abs(res) / scale);
  }
  if (out.max_identity_residual > identity_tol) {
    std::ostringstream os;
    os << "identity beta + u'' + 3u'/r = 0 violated (relative residual "
       << out.max_identity_residual << ")";
    fail(os.str());
  }

  // decay slopes over the last decade of the grid
  std::vector<double> lx, lo, lb;
  for (int i = 0; i < g.size(); ++i) {
    const double r = g.r[i];
    if (r < 0.1 * g.r_max()) continue;
    const double w = v.omega(r), b = v.beta(r);
    if (w > 0.0 && b > 0.0) {
      lx.push_back(std::log(r));
      lo.push_back(std::log(w));
      lb.push_back(std::log(b));
    }
  }
  if (lx.size() >= 4) {
    out.omega_tail_slope = linear_fit(lx, lo).slope;
    out.beta_tail_slope = linear_fit(lx, lb).slope;
    if (out.omega_tail_slope > -6.0 + 0.5) {
      std::ostringstream os;
      os << "omega decays too slowly (tail slope " << out.omega_tail_slope
         << ", need <= -6)";
      fail(os.str());
    }
    if (out.beta_tail_slope > -8.0 + 0.5) {
      std::ostringstream os;
      os << "beta decays too slowly (tail slope " << out.beta_tail_slope
         << ", need <= -8)";
      fail(os.str());
    }
  } else {
    fail("grid too short to assess tail decay");
  }
  return out;
}

inline void require_valid_vortex(const RadialVortex& v, const RadialGrid& g) {
  const auto val = validate_vortex(v, g);
  if (!val.ok) {
    std::string msg = "vortex validation failed:";
    for (const auto& s : val.violations) msg += "\n  - " + s;
    throw std::invalid_argument(msg);
  }
}

}  // namespace vortexlab
