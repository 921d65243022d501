#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace vortexlab {

using complexd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;

inline double sq(double x) { return x * x; }

// ---------------------------------------------------------------------------
// Smooth cutoff built from exp(-1/x): identically 1 for x <= 1/2, identically
// 0 for x >= 3/4, C-infinity in between.  First and second derivatives are
// provided analytically since they enter source terms, not just masks.
// ---------------------------------------------------------------------------

namespace detail {

struct BumpVal {
  double g, g1, g2;  // exp(-1/xi) and its first two derivatives
};

inline BumpVal bump_exp(double xi) {
  if (xi <= 0.0) return {0.0, 0.0, 0.0};
  const double g = std::exp(-1.0 / xi);
  const double g1 = g / (xi * xi);
  const double g2 = g * (1.0 - 2.0 * xi) / (xi * xi * xi * xi);
  return {g, g1, g2};
}

// Monotone C-infinity step: 0 for xi <= 0, 1 for xi >= 1.
struct StepVal {
  double s, s1, s2;
};

inline StepVal smooth_step(double xi) {
  if (xi <= 0.0) return {0.0, 0.0, 0.0};
  if (xi >= 1.0) return {1.0, 0.0, 0.0};
  const BumpVal a = bump_exp(xi);
  const BumpVal b = bump_exp(1.0 - xi);
  const double D = a.g + b.g;
  const double Dp = a.g1 - b.g1;
  const double N = a.g1 * b.g + a.g * b.g1;
  const double Np = a.g2 * b.g - a.g * b.g2;
  const double s = a.g / D;
  const double s1 = N / (D * D);
  const double s2 = (Np * D - 2.0 * N * Dp) / (D * D * D);
  return {s, s1, s2};
}

}  // namespace detail

inline double smooth_cutoff(double x) {
  return detail::smooth_step(3.0 - 4.0 * x).s;
}

inline double smooth_cutoff_d1(double x) {
  return -4.0 * detail::smooth_step(3.0 - 4.0 * x).s1;
}

inline double smooth_cutoff_d2(double x) {
  return 16.0 * detail::smooth_step(3.0 - 4.0 * x).s2;
}

// ---------------------------------------------------------------------------
// Finite-difference weights on arbitrary nodes (Fornberg's recursion).
// Returns weights so that f^(m)(z) ~ sum_i w[i] f(x[i]).
// ---------------------------------------------------------------------------

inline std::vector<double> fd_weights(double z, const double* x, int n, int m) {
  // c[j][k]: weight of node j for derivative order k.
  std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> out(n);
  for (int j = 0; j < n; ++j) out[j] = c[j][m];
  return out;
}

// ---------------------------------------------------------------------------
// Gauss-Legendre 4-point rule on [-1, 1]; exact through degree 7.
// ---------------------------------------------------------------------------

inline constexpr std::array<double, 4> kGL4Nodes = {
    -0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
    0.8611363115940526};
inline constexpr std::array<double, 4> kGL4Weights = {
    0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
    0.3478548451374538};

// ---------------------------------------------------------------------------
// Tridiagonal solve (Thomas algorithm) for a real matrix and complex rhs.
// sub[i] multiplies x[i-1] in row i, sup[i] multiplies x[i+1].
// Returns a crude conditioning proxy: max|diag before elimination| / min|pivot|.
// ---------------------------------------------------------------------------

inline double solve_tridiagonal(std::vector<double> sub, std::vector<double> diag,
                                std::vector<double> sup,
                                std::vector<complexd>& rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return 0.0;
  double max_entry = 0.0, min_pivot = std::abs(diag[0]);
  for (std::size_t i = 0; i < n; ++i)
    max_entry = std::max({max_entry, std::abs(diag[i]),
                          i ? std::abs(sub[i]) : 0.0,
                          i + 1 < n ? std::abs(sup[i]) : 0.0});
  for (std::size_t i = 1; i < n; ++i) {
    if (diag[i - 1] == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
    min_pivot = std::min(min_pivot, std::abs(diag[i]));
  }
  if (diag[n - 1] == 0.0) throw std::runtime_error("tridiagonal solve: zero pivot");
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
  return min_pivot > 0.0 ? max_entry / min_pivot : std::numeric_limits<double>::infinity();
}

// Complex-matrix variant (used when the potential is complex).
inline double solve_tridiagonal(std::vector<complexd> sub, std::vector<complexd> diag,
                                std::vector<complexd> sup,
                                std::vector<complexd>& rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return 0.0;
  double max_entry = 0.0, min_pivot = std::abs(diag[0]);
  for (std::size_t i = 0; i < n; ++i)
    max_entry = std::max({max_entry, std::abs(diag[i]),
                          i ? std::abs(sub[i]) : 0.0,
                          i + 1 < n ? std::abs(sup[i]) : 0.0});
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs(diag[i - 1]) == 0.0)
      throw std::runtime_error("tridiagonal solve: zero pivot");
    const complexd m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
    min_pivot = std::min(min_pivot, std::abs(diag[i]));
  }
  if (std::abs(diag[n - 1]) == 0.0)
    throw std::runtime_error("tridiagonal solve: zero pivot");
  rhs[n - 1] /= diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    rhs[i] = (rhs[i] - sup[i] * rhs[i + 1]) / diag[i];
  return min_pivot > 0.0 ? max_entry / min_pivot : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------
// Ordinary least squares y = a + b x, with the standard error of b.
// ---------------------------------------------------------------------------

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  int n = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x,
                            const std::vector<double>& y) {
  LinearFit f;
  const int n = static_cast<int>(x.size());
  if (n < 2 || y.size() != x.size())
    throw std::invalid_argument("linear_fit: need >= 2 matched points");
  double mx = 0, my = 0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_fit: degenerate abscissae");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (int i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.stderr_slope = n > 2 ? std::sqrt(ss / (n - 2) / sxx) : 0.0;
  f.n = n;
  return f;
}

}  // namespace vortexlab
