#pragma once

#include <cmath>
#include <stdexcept>

#include "vortexlab/grid.hpp"
#include "vortexlab/vortex.hpp"

namespace vortexlab {

// ---------------------------------------------------------------------------
// Two-sided power-law weights.  Each family prescribes an inner exponent a
// (behaviour r^a as r -> 0) and an outer exponent b (r^b as r -> infinity);
// the glue
//
//   w(r) = r^a ((1 + r^{2m}) / 2)^{(b-a)/(2m)},   m = max(1, (a-b)/2)
//
// is smooth, equals 1 at r = 1, and stays within a factor of 2 of the pure
// power laws on both sides.  Norms are ( int |g|^2 / w^2 dr )^{1/2}.
// The "beta" family is the conserved energy of the linearized flow,
// ( int |g|^2 beta^{-1} r dr )^{1/2}, and "plain" is the unweighted L^2(dr).
// ---------------------------------------------------------------------------

enum class WeightFamily { psi, f, F, beta, plain };

struct WeightSpec {
  WeightFamily family = WeightFamily::plain;
  double delta = 0.1;
};

struct WeightExponents {
  double a = 0.0, b = 0.0;
};

inline WeightExponents weight_exponents(const WeightSpec& spec, int k) {
  if (k == 0) throw std::invalid_argument("k must be a nonzero integer");
  const double ak = std::abs(static_cast<double>(k));
  const double d = spec.delta;
  if (!(d > 0.0 && d < 0.5))
    throw std::invalid_argument("weight delta must lie in (0, 1/2)");
  switch (spec.family) {
    case WeightFamily::psi:
      return {ak + 0.5 - d, -ak + 0.5 + d};
    case WeightFamily::f:
      return {ak + 0.5 - d, -ak + 0.5 - 6.0 + d};
    case WeightFamily::F:
      return {ak + 3.0 - d, -ak - 5.0 + d};
    default:
      throw std::logic_error("weight_exponents: family carries no exponents");
  }
}

inline double weight_value(const WeightSpec& spec, int k, double r) {
  if (spec.family == WeightFamily::beta || spec.family == WeightFamily::plain)
    throw std::logic_error("weight_value: family has no pointwise weight");
  if (!(r > 0.0)) throw std::domain_error("weight_value: r must be positive");
  const auto [a, b] = weight_exponents(spec, k);
  const double m = std::max(1.0, 0.5 * (a - b));
  // log-space evaluation keeps r^{2m} from overflowing for large r
  const double t = 2.0 * m * std::log(r);
  double log_glue;
  if (t > 0.0)
    log_glue = t + std::log1p(std::exp(-t)) - std::log(2.0);
  else
    log_glue = std::log1p(std::exp(t)) - std::log(2.0);
  return std::exp(a * std::log(r) + (b - a) / (2.0 * m) * log_glue);
}

inline double weighted_norm(const ModeField& g, const WeightSpec& spec,
                            const RadialVortex* vort = nullptr) {
  const RadialGrid& grid = *g.grid;
  std::vector<double> integrand(grid.size());
  switch (spec.family) {
    case WeightFamily::plain:
      for (int i = 0; i < grid.size(); ++i) integrand[i] = std::norm(g.v[i]);
      break;
    case WeightFamily::beta: {
      if (!vort)
        throw std::invalid_argument("weighted_norm: beta family needs the vortex");
      for (int i = 0; i < grid.size(); ++i) {
        const double r = grid.r[i];
        const double m = std::norm(g.v[i]);
        // beta underflows to zero far out; a field that already vanished
        // there contributes nothing rather than 0 * inf
        integrand[i] = m == 0.0 ? 0.0 : m * r / vort->beta(r);
      }
      break;
    }
    default:
      for (int i = 0; i < grid.size(); ++i) {
        const double w = weight_value(spec, g.k, grid.r[i]);
        integrand[i] = std::norm(g.v[i]) / (w * w);
      }
  }
  return std::sqrt(std::max(0.0, integrate(grid, integrand)));
}

// Inner product of the conserved quadratic form, int f conj(g) (r / beta) dr.
inline complexd beta_inner(const RadialVortex& vort, const ModeField& f,
                           const ModeField& g) {
  require_same_grid(f, g);
  const RadialGrid& grid = *f.grid;
  std::vector<complexd> integrand(grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    const double r = grid.r[i];
    const complexd m = f.v[i] * std::conj(g.v[i]);
    integrand[i] =
        m == complexd{0.0, 0.0} ? complexd{0.0, 0.0} : m * (r / vort.beta(r));
  }
  return integrate(grid, integrand);
}

inline double beta_norm(const RadialVortex& vort, const ModeField& f) {
  return std::sqrt(std::max(0.0, beta_inner(vort, f, f).real()));
}

}  // namespace vortexlab
