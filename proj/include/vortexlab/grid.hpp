#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "vortexlab/math_util.hpp"

namespace vortexlab {

// ---------------------------------------------------------------------------
// Radial quadrature grid.  Nodes are strictly increasing and strictly
// positive.  Each panel [r_i, r_{i+1}] carries a 4-point interpolatory rule
// built from the cubic through the nodes {s, s+1, s+2, s+3} where the stencil
// start s is i-1 clamped into range.  Global node weights are the accumulated
// panel weights; composite rule is 4th order in the local spacing and exact
// for cubics.  Cumulative integrals reuse the same panel rules so prefix and
// suffix sums are consistent with integrate() to rounding.
// ---------------------------------------------------------------------------

struct RadialGrid {
  std::vector<double> r;                      // nodes
  std::vector<double> w;                      // global quadrature weights
  std::vector<int> panel_start;               // stencil start per panel
  std::vector<std::array<double, 4>> panel_w; // per-panel stencil weights

  int size() const { return static_cast<int>(r.size()); }
  int panels() const { return static_cast<int>(panel_w.size()); }
  double r_min() const { return r.front(); }
  double r_max() const { return r.back(); }

  // Index of the panel containing x (clamped to the end panels).
  int panel_of(double x) const {
    const auto it = std::upper_bound(r.begin(), r.end(), x);
    int i = static_cast<int>(it - r.begin()) - 1;
    return std::clamp(i, 0, panels() - 1);
  }
};

inline std::shared_ptr<RadialGrid> make_grid_from_nodes(std::vector<double> nodes) {
  if (nodes.size() < 8)
    throw std::invalid_argument("grid: need at least 8 nodes");
  if (nodes.front() <= 0.0)
    throw std::invalid_argument("grid: nodes must be strictly positive");
  for (std::size_t i = 1; i < nodes.size(); ++i)
    if (nodes[i] <= nodes[i - 1])
      throw std::invalid_argument("grid: nodes must be strictly increasing");

  auto g = std::make_shared<RadialGrid>();
  g->r = std::move(nodes);
  const int n = g->size();
  g->w.assign(n, 0.0);
  g->panel_start.resize(n - 1);
  g->panel_w.resize(n - 1);

  for (int p = 0; p < n - 1; ++p) {
    const int s = std::clamp(p - 1, 0, n - 4);
    g->panel_start[p] = s;
    const double a = g->r[p], b = g->r[p + 1];
    const double xm = 0.5 * (a + b), xh = 0.5 * (b - a);
    std::array<double, 4> wts{0.0, 0.0, 0.0, 0.0};
    // Integrate each cubic Lagrange basis over the panel with GL4 (exact).
    for (int q = 0; q < 4; ++q) {
      const double x = xm + xh * kGL4Nodes[q];
      const double gw = xh * kGL4Weights[q];
      for (int m = 0; m < 4; ++m) {
        double L = 1.0;
        for (int j = 0; j < 4; ++j) {
          if (j == m) continue;
          L *= (x - g->r[s + j]) / (g->r[s + m] - g->r[s + j]);
        }
        wts[m] += gw * L;
      }
    }
    g->panel_w[p] = wts;
    for (int m = 0; m < 4; ++m) g->w[s + m] += wts[m];
  }
  for (int i = 0; i < n; ++i)
    if (!(g->w[i] > 0.0))
      throw std::runtime_error("grid: nonpositive quadrature weight (nodes too irregular)");
  return g;
}

// Geometric (log-uniform) grid, the default for radially decaying profiles.
inline std::shared_ptr<RadialGrid> make_geometric_grid(double r_min, double r_max,
                                                       int n) {
  if (!(r_min > 0.0) || !(r_max > r_min))
    throw std::invalid_argument("grid: require 0 < r_min < r_max");
  if (n < 8) throw std::invalid_argument("grid: need at least 8 nodes");
  std::vector<double> nodes(n);
  const double eta = std::log(r_max / r_min) / (n - 1);
  for (int i = 0; i < n; ++i) nodes[i] = r_min * std::exp(eta * i);
  nodes.back() = r_max;
  return make_grid_from_nodes(std::move(nodes));
}

// ---------------------------------------------------------------------------
// A single azimuthal mode sampled on a grid.
// ---------------------------------------------------------------------------

struct ModeField {
  int k = 1;
  std::shared_ptr<const RadialGrid> grid;
  std::vector<complexd> v;

  ModeField() = default;
  ModeField(int k_, std::shared_ptr<const RadialGrid> g)
      : k(k_), grid(std::move(g)), v(grid->size(), complexd{0.0, 0.0}) {}
};

inline void require_same_grid(const ModeField& a, const ModeField& b) {
  if (a.grid.get() != b.grid.get() || a.k != b.k)
    throw std::invalid_argument("fields live on different grids or modes");
}

// ---------------------------------------------------------------------------
// Quadrature on sampled data.
// ---------------------------------------------------------------------------

template <class T>
T integrate(const RadialGrid& g, const std::vector<T>& f) {
  if (static_cast<int>(f.size()) != g.size())
    throw std::invalid_argument("integrate: sample count mismatch");
  T acc{};
  for (int i = 0; i < g.size(); ++i) acc += g.w[i] * f[i];
  return acc;
}

// prefix[i] = integral from r_0 to r_i; prefix[0] = 0.
template <class T>
std::vector<T> prefix_integral(const RadialGrid& g, const std::vector<T>& f) {
  if (static_cast<int>(f.size()) != g.size())
    throw std::invalid_argument("prefix_integral: sample count mismatch");
  std::vector<T> c(g.size());
  c[0] = T{};
  for (int p = 0; p < g.panels(); ++p) {
    const int s = g.panel_start[p];
    T panel{};
    for (int m = 0; m < 4; ++m) panel += g.panel_w[p][m] * f[s + m];
    c[p + 1] = c[p] + panel;
  }
  return c;
}

// anchored[i] = signed integral from r_{i0} to r_i; anchored[i0] = 0.
// Accumulates panels outward from the anchor in both directions, so values
// near the anchor carry only local roundoff even when the integrand is many
// orders of magnitude larger elsewhere (prefix-minus-prefix would cancel
// catastrophically there).
template <class T>
std::vector<T> anchored_integral(const RadialGrid& g, const std::vector<T>& f,
                                 int i0) {
  if (static_cast<int>(f.size()) != g.size())
    throw std::invalid_argument("anchored_integral: sample count mismatch");
  if (i0 < 0 || i0 >= g.size())
    throw std::invalid_argument("anchored_integral: anchor out of range");
  std::vector<T> c(g.size());
  c[i0] = T{};
  for (int p = i0; p < g.panels(); ++p) {
    const int s = g.panel_start[p];
    T panel{};
    for (int m = 0; m < 4; ++m) panel += g.panel_w[p][m] * f[s + m];
    c[p + 1] = c[p] + panel;
  }
  for (int p = i0 - 1; p >= 0; --p) {
    const int s = g.panel_start[p];
    T panel{};
    for (int m = 0; m < 4; ++m) panel += g.panel_w[p][m] * f[s + m];
    c[p] = c[p + 1] - panel;
  }
  return c;
}

// suffix[i] = integral from r_i to r_max; suffix[n-1] = 0.
template <class T>
std::vector<T> suffix_integral(const RadialGrid& g, const std::vector<T>& f) {
  if (static_cast<int>(f.size()) != g.size())
    throw std::invalid_argument("suffix_integral: sample count mismatch");
  std::vector<T> c(g.size());
  c[g.size() - 1] = T{};
  for (int p = g.panels() - 1; p >= 0; --p) {
    const int s = g.panel_start[p];
    T panel{};
    for (int m = 0; m < 4; ++m) panel += g.panel_w[p][m] * f[s + m];
    c[p] = c[p + 1] + panel;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Cubic interpolation of sampled data using the panel stencils.  Off-grid
// queries clamp to the end panels (callers are expected to stay in range).
// ---------------------------------------------------------------------------

template <class T>
T interp_at(const RadialGrid& g, const std::vector<T>& f, double x) {
  const int p = g.panel_of(x);
  const int s = g.panel_start[p];
  T acc{};
  for (int m = 0; m < 4; ++m) {
    double L = 1.0;
    for (int j = 0; j < 4; ++j) {
      if (j == m) continue;
      L *= (x - g.r[s + j]) / (g.r[s + m] - g.r[s + j]);
    }
    acc += L * f[s + m];
  }
  return acc;
}

// Derivative samples via centered 5-point stencils (one-sided at the ends).
template <class T>
std::vector<T> derivative_samples(const RadialGrid& g, const std::vector<T>& f,
                                  int order = 1, int stencil = 5) {
  const int n = g.size();
  if (static_cast<int>(f.size()) != n)
    throw std::invalid_argument("derivative_samples: sample count mismatch");
  if (stencil > n) stencil = n;
  std::vector<T> out(n);
  for (int i = 0; i < n; ++i) {
    int s = std::clamp(i - stencil / 2, 0, n - stencil);
    const auto wts = fd_weights(g.r[i], g.r.data() + s, stencil, order);
    T acc{};
    for (int m = 0; m < stencil; ++m) acc += wts[m] * f[s + m];
    out[i] = acc;
  }
  return out;
}

}  // namespace vortexlab
