#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "vortexlab/biot_savart.hpp"
#include "vortexlab/contour.hpp"
#include "vortexlab/diagnostics.hpp"
#include "vortexlab/evolution.hpp"
#include "vortexlab/grid.hpp"
#include "vortexlab/k1_oracle.hpp"
#include "vortexlab/vortex.hpp"
#include "vortexlab/weights.hpp"

namespace vortexlab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Declarative run description.  A run is: a vortex, a grid, one azimuthal
// mode of initial data, an engine that produces snapshots in time, and a set
// of diagnostics evaluated on the snapshots.
// ---------------------------------------------------------------------------

struct GridConfig {
  double r_min = 1e-3, r_max = 60.0;
  int n = 2048;
};

struct VortexConfig {
  std::string family = "gaussian";  // gaussian | tabulated
  double circulation = 2.0 * kPi;
  double core_radius = 1.0;
  std::string file;  // tabulated: CSV with columns r, omega
};

struct InitialConfig {
  std::string family = "bump";  // bump | power_gauss | steady | tabulated
  double center = 1.0, width = 0.5, amplitude = 1.0;
  std::string file;  // tabulated: CSV with columns r, re, im
  bool project_neutral = false;
};

struct TimesConfig {
  std::vector<double> list;  // explicit snapshot times win when nonempty
  double start = 1.0, stop = 10.0;
  int count = 10;
  std::string spacing = "linear";  // linear | log

  std::vector<double> resolve() const {
    if (!list.empty()) {
      std::vector<double> ts = list;
      std::sort(ts.begin(), ts.end());
      return ts;
    }
    if (count < 1) throw std::invalid_argument("times: count must be positive");
    if (count == 1) return {start};
    std::vector<double> ts(count);
    if (spacing == "log") {
      if (!(start > 0.0))
        throw std::invalid_argument("times: log spacing needs start > 0");
      const double g = std::log(stop / start) / (count - 1);
      for (int i = 0; i < count; ++i) ts[i] = start * std::exp(g * i);
    } else if (spacing == "linear") {
      for (int i = 0; i < count; ++i)
        ts[i] = start + (stop - start) * i / (count - 1);
    } else {
      throw std::invalid_argument("times: spacing must be linear or log");
    }
    return ts;
  }
};

struct EvolveConfig {
  double dt_factor = 5.0;
  bool phase_aware = true;
  bool stability_check = true;
};

struct ContourConfig {
  double eps = 1e-3, alpha = 0.05, R_delta = 1.0, far_pad = 6.0;
  int min_spectrum_nodes = 96;
  std::string path = "auto";
  bool decompose = false;
  // spectral parameters c in (0, u(0)) whose resolvent internals get dumped
  std::vector<double> dump_points;
};

struct DiagnosticsConfig {
  bool damping = true;
  double damping_fit_lo = 20.0, damping_fit_hi = 200.0;
  bool depletion = false;
  double depletion_r_lo = 1e-3, depletion_r_hi = 1e-2, depletion_t_min = 0.0;
  bool scattering = false;
  double weight_delta = 0.1;
};

struct RunConfig {
  std::string name = "run";
  int k = 2;
  std::string engine = "timestep";  // timestep | passive | contour | k1_oracle
  GridConfig grid;
  VortexConfig vortex;
  InitialConfig initial;
  TimesConfig times;
  EvolveConfig evolve;
  ContourConfig contour;
  DiagnosticsConfig diagnostics;
  int threads = 1;
};

// ---------------------------------------------------------------------------
// JSON binding.  Parsing is strict about key names so typos fail loudly;
// missing keys keep their defaults.
// ---------------------------------------------------------------------------

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed,
                       const char* where) {
  if (!j.is_object())
    throw std::invalid_argument(std::string("config: ") + where +
                                " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed)
      if (it.key() == a) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument("config: unknown key '" + it.key() + "' in " +
                                  where);
  }
}

template <class T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline void from_json_into(const json& j, GridConfig& g) {
  detail::check_keys(j, {"r_min", "r_max", "n"}, "grid");
  detail::get_if(j, "r_min", g.r_min);
  detail::get_if(j, "r_max", g.r_max);
  detail::get_if(j, "n", g.n);
}

inline void from_json_into(const json& j, VortexConfig& v) {
  detail::check_keys(j, {"family", "circulation", "core_radius", "file"},
                     "vortex");
  detail::get_if(j, "family", v.family);
  detail::get_if(j, "circulation", v.circulation);
  detail::get_if(j, "core_radius", v.core_radius);
  detail::get_if(j, "file", v.file);
}

inline void from_json_into(const json& j, InitialConfig& ic) {
  detail::check_keys(
      j, {"family", "center", "width", "amplitude", "file", "project_neutral"},
      "initial");
  detail::get_if(j, "family", ic.family);
  detail::get_if(j, "center", ic.center);
  detail::get_if(j, "width", ic.width);
  detail::get_if(j, "amplitude", ic.amplitude);
  detail::get_if(j, "file", ic.file);
  detail::get_if(j, "project_neutral", ic.project_neutral);
}

inline void from_json_into(const json& j, TimesConfig& t) {
  if (j.is_array()) {
    t.list = j.get<std::vector<double>>();
    return;
  }
  detail::check_keys(j, {"list", "start", "stop", "count", "spacing"}, "times");
  detail::get_if(j, "list", t.list);
  detail::get_if(j, "start", t.start);
  detail::get_if(j, "stop", t.stop);
  detail::get_if(j, "count", t.count);
  detail::get_if(j, "spacing", t.spacing);
}

inline void from_json_into(const json& j, EvolveConfig& e) {
  detail::check_keys(j, {"dt_factor", "phase_aware", "stability_check"},
                     "evolve");
  detail::get_if(j, "dt_factor", e.dt_factor);
  detail::get_if(j, "phase_aware", e.phase_aware);
  detail::get_if(j, "stability_check", e.stability_check);
}

inline void from_json_into(const json& j, ContourConfig& c) {
  detail::check_keys(j,
                     {"eps", "alpha", "R_delta", "far_pad", "c_nodes",
                      "min_spectrum_nodes", "path", "decompose", "dump_points"},
                     "contour");
  detail::get_if(j, "eps", c.eps);
  detail::get_if(j, "alpha", c.alpha);
  detail::get_if(j, "R_delta", c.R_delta);
  detail::get_if(j, "far_pad", c.far_pad);
  detail::get_if(j, "c_nodes", c.min_spectrum_nodes);
  detail::get_if(j, "min_spectrum_nodes", c.min_spectrum_nodes);
  detail::get_if(j, "path", c.path);
  detail::get_if(j, "decompose", c.decompose);
  detail::get_if(j, "dump_points", c.dump_points);
}

inline void from_json_into(const json& j, DiagnosticsConfig& d) {
  detail::check_keys(j,
                     {"damping", "damping_fit_lo", "damping_fit_hi",
                      "depletion", "depletion_r_lo", "depletion_r_hi",
                      "depletion_t_min", "scattering", "weight_delta"},
                     "diagnostics");
  detail::get_if(j, "damping", d.damping);
  detail::get_if(j, "damping_fit_lo", d.damping_fit_lo);
  detail::get_if(j, "damping_fit_hi", d.damping_fit_hi);
  detail::get_if(j, "depletion", d.depletion);
  detail::get_if(j, "depletion_r_lo", d.depletion_r_lo);
  detail::get_if(j, "depletion_r_hi", d.depletion_r_hi);
  detail::get_if(j, "depletion_t_min", d.depletion_t_min);
  detail::get_if(j, "scattering", d.scattering);
  detail::get_if(j, "weight_delta", d.weight_delta);
}

inline RunConfig parse_run_config(const json& j) {
  detail::check_keys(j,
                     {"name", "k", "engine", "grid", "vortex", "initial",
                      "times", "evolve", "contour", "diagnostics", "threads"},
                     "run");
  RunConfig cfg;
  detail::get_if(j, "name", cfg.name);
  detail::get_if(j, "k", cfg.k);
  detail::get_if(j, "engine", cfg.engine);
  if (j.contains("grid")) from_json_into(j.at("grid"), cfg.grid);
  if (j.contains("vortex")) from_json_into(j.at("vortex"), cfg.vortex);
  if (j.contains("initial")) from_json_into(j.at("initial"), cfg.initial);
  if (j.contains("times")) from_json_into(j.at("times"), cfg.times);
  if (j.contains("evolve")) from_json_into(j.at("evolve"), cfg.evolve);
  if (j.contains("contour")) from_json_into(j.at("contour"), cfg.contour);
  if (j.contains("diagnostics"))
    from_json_into(j.at("diagnostics"), cfg.diagnostics);
  detail::get_if(j, "threads", cfg.threads);
  if (cfg.k == 0) throw std::invalid_argument("k must be a nonzero integer");
  if (cfg.engine != "timestep" && cfg.engine != "passive" &&
      cfg.engine != "contour" && cfg.engine != "k1_oracle")
    throw std::invalid_argument("config: unknown engine '" + cfg.engine + "'");
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  return parse_run_config(j);
}

inline json to_json(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  j["k"] = c.k;
  j["engine"] = c.engine;
  j["grid"] = {{"r_min", c.grid.r_min}, {"r_max", c.grid.r_max}, {"n", c.grid.n}};
  j["vortex"] = {{"family", c.vortex.family},
                 {"circulation", c.vortex.circulation},
                 {"core_radius", c.vortex.core_radius},
                 {"file", c.vortex.file}};
  j["initial"] = {{"family", c.initial.family},
                  {"center", c.initial.center},
                  {"width", c.initial.width},
                  {"amplitude", c.initial.amplitude},
                  {"file", c.initial.file},
                  {"project_neutral", c.initial.project_neutral}};
  j["times"] = {{"list", c.times.list},
                {"start", c.times.start},
                {"stop", c.times.stop},
                {"count", c.times.count},
                {"spacing", c.times.spacing}};
  j["evolve"] = {{"dt_factor", c.evolve.dt_factor},
                 {"phase_aware", c.evolve.phase_aware},
                 {"stability_check", c.evolve.stability_check}};
  j["contour"] = {{"eps", c.contour.eps},
                  {"alpha", c.contour.alpha},
                  {"R_delta", c.contour.R_delta},
                  {"far_pad", c.contour.far_pad},
                  {"c_nodes", c.contour.min_spectrum_nodes},
                  {"path", c.contour.path},
                  {"decompose", c.contour.decompose},
                  {"dump_points", c.contour.dump_points}};
  j["diagnostics"] = {{"damping", c.diagnostics.damping},
                      {"damping_fit_lo", c.diagnostics.damping_fit_lo},
                      {"damping_fit_hi", c.diagnostics.damping_fit_hi},
                      {"depletion", c.diagnostics.depletion},
                      {"depletion_r_lo", c.diagnostics.depletion_r_lo},
                      {"depletion_r_hi", c.diagnostics.depletion_r_hi},
                      {"depletion_t_min", c.diagnostics.depletion_t_min},
                      {"scattering", c.diagnostics.scattering},
                      {"weight_delta", c.diagnostics.weight_delta}};
  j["threads"] = c.threads;
  return j;
}

inline std::uint64_t fnv1a_hash(std::string_view s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string config_hash_hex(const RunConfig& c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(to_json(c).dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Building the pieces a run needs.
// ---------------------------------------------------------------------------

namespace detail {

// Loose CSV reader: comma or whitespace separated, '#' comments, an optional
// non-numeric header line.
inline std::vector<std::vector<double>> read_csv_columns(const std::string& path,
                                                         std::size_t min_cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  std::vector<std::vector<double>> cols;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    for (char& ch : line)
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    std::istringstream ss(line);
    std::vector<double> row;
    double x;
    while (ss >> x) row.push_back(x);
    if (row.empty()) {
      std::string word;
      std::istringstream probe(line);
      if (first && (probe >> word)) {
        first = false;  // header line
        continue;
      }
      continue;
    }
    first = false;
    if (row.size() < min_cols)
      throw std::runtime_error("data file " + path + ": expected at least " +
                               std::to_string(min_cols) + " columns");
    if (cols.empty()) cols.resize(row.size());
    if (row.size() != cols.size())
      throw std::runtime_error("data file " + path + ": ragged rows");
    for (std::size_t c = 0; c < row.size(); ++c) cols[c].push_back(row[c]);
  }
  if (cols.empty() || cols[0].empty())
    throw std::runtime_error("data file " + path + ": no numeric rows");
  return cols;
}

}  // namespace detail

inline RadialVortex build_vortex(const VortexConfig& vc) {
  if (vc.family == "gaussian")
    return make_gaussian_vortex(vc.circulation, vc.core_radius);
  if (vc.family == "tabulated") {
    if (vc.file.empty())
      throw std::invalid_argument("tabulated vortex needs a file");
    const auto cols = detail::read_csv_columns(vc.file, 2);
    return make_vortex_from_samples(cols[0], cols[1]);
  }
  throw std::invalid_argument("unknown vortex family '" + vc.family + "'");
}

inline ModeField build_initial_condition(const RadialVortex& vort,
                                         std::shared_ptr<const RadialGrid> grid,
                                         int k, const InitialConfig& ic) {
  ModeField f(k, std::move(grid));
  const RadialGrid& g = *f.grid;
  if (ic.family == "bump") {
    if (!(ic.width > 0.0))
      throw std::invalid_argument("bump initial data needs width > 0");
    for (int i = 0; i < g.size(); ++i) {
      const double s = (g.r[i] - ic.center) / ic.width;
      if (std::abs(s) < 1.0)
        f.v[i] = ic.amplitude * std::exp(1.0 - 1.0 / (1.0 - s * s));
    }
  } else if (ic.family == "power_gauss") {
    const int ak = std::abs(k);
    for (int i = 0; i < g.size(); ++i)
      f.v[i] = ic.amplitude * std::pow(g.r[i], ak) * std::exp(-g.r[i] * g.r[i]);
  } else if (ic.family == "steady") {
    f = steady_state_field(vort, f.grid, k);
    for (auto& v : f.v) v *= ic.amplitude;
  } else if (ic.family == "tabulated") {
    if (ic.file.empty())
      throw std::invalid_argument("tabulated initial data needs a file");
    const auto cols = detail::read_csv_columns(ic.file, 3);
    auto fgrid = make_grid_from_nodes(cols[0]);
    std::vector<complexd> fv(fgrid->size());
    for (int i = 0; i < fgrid->size(); ++i)
      fv[i] = complexd{cols[1][i], cols[2][i]} * ic.amplitude;
    for (int i = 0; i < g.size(); ++i) {
      const double r = g.r[i];
      if (r < fgrid->r_min() || r > fgrid->r_max()) continue;
      f.v[i] = interp_at(*fgrid, fv, r);
    }
  } else {
    throw std::invalid_argument("unknown initial data family '" + ic.family + "'");
  }
  if (ic.project_neutral) {
    if (std::abs(k) != 1)
      throw std::invalid_argument("project_neutral applies only to |k| = 1");
    f = project_orthogonal(vort, f).first;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Engine dispatch.
// ---------------------------------------------------------------------------

struct RunResult {
  RunConfig cfg;
  RadialVortex vortex;
  ModeField initial;
  std::vector<EvolutionState> states;
  std::vector<FDecomposition> decompositions;
  double dt = 0.0;
  long steps = 0;
  double max_beta_drift = 0.0, max_momentum_drift = 0.0;
  double contour_residual = 0.0;
  int greens_solves = 0, bvp_solves = 0;
  bool region_iii_empty = false;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
};

inline RunResult execute_run(const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  res.cfg = cfg;
  res.vortex = build_vortex(cfg.vortex);
  auto grid = make_geometric_grid(cfg.grid.r_min, cfg.grid.r_max, cfg.grid.n);
  {
    const auto val = validate_vortex(res.vortex, *grid);
    if (!val.ok) {
      std::string msg = "vortex profile failed validation:";
      for (const auto& v : val.violations) msg += "\n  " + v;
      throw std::runtime_error(msg);
    }
  }
  res.initial = build_initial_condition(res.vortex, grid, cfg.k, cfg.initial);
  const auto ts = cfg.times.resolve();

  if (cfg.engine == "timestep" || cfg.engine == "passive") {
    EvolveOptions opts;
    opts.dt_factor = cfg.evolve.dt_factor;
    opts.passive = cfg.engine == "passive";
    opts.phase_aware = cfg.evolve.phase_aware;
    opts.stability_check = cfg.evolve.stability_check;
    auto er = evolve(res.vortex, res.initial, ts, opts);
    res.states = std::move(er.states);
    res.dt = er.dt;
    res.steps = er.steps;
    res.max_beta_drift = er.max_beta_drift;
    res.max_momentum_drift = er.max_momentum_drift;
  } else if (cfg.engine == "contour") {
    ContourOptions co;
    co.eps = cfg.contour.eps;
    co.alpha = cfg.contour.alpha;
    co.R_delta = cfg.contour.R_delta;
    co.far_pad = cfg.contour.far_pad;
    co.min_spectrum_nodes = cfg.contour.min_spectrum_nodes;
    co.path = cfg.contour.path;
    co.t_max = ts.empty() ? 1.0 : std::max(1.0, ts.back());
    const auto plan = build_contour_plan(res.vortex, cfg.k, co);
    const auto cache =
        solve_contour_nodes(res.vortex, res.initial, plan, cfg.threads);
    res.states = evolve_contour(res.vortex, res.initial, cache, ts);
    res.contour_residual = cache.max_residual;
    res.greens_solves = cache.greens_solves;
    res.bvp_solves = cache.bvp_solves;
    res.region_iii_empty = plan.region_iii_empty;
    if (cache.warn)
      res.warnings.push_back("an off-spectrum resolvent solve was ill-conditioned");
    if (plan.region_iii_empty)
      res.warnings.push_back(
          "layer window is empty at this eps and k; f1/f2 pieces vanish");
    if (cfg.contour.decompose)
      for (double t : ts)
        res.decompositions.push_back(decompose_f(
            res.vortex, res.initial, cache, t, cfg.diagnostics.weight_delta));
  } else if (cfg.engine == "k1_oracle") {
    const auto f11 = k1_first_profile(res.vortex, res.initial);
    for (double t : ts) {
      EvolutionState st;
      st.t = t;
      st.omega = k1_vorticity(res.vortex, f11, t);
      st.psi = k1_stream(res.vortex, f11, t);
      st.beta_norm = beta_norm(res.vortex, st.omega);
      st.momentum = radial_moment(st.omega);
      res.states.push_back(std::move(st));
    }
  }

  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

// ---------------------------------------------------------------------------
// Output files.  All numbers are written with %.17g so files round-trip.
// ---------------------------------------------------------------------------

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_out(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "w"));
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

}  // namespace detail

inline void write_snapshots_csv(const std::string& path,
                                const std::vector<EvolutionState>& states) {
  auto f = detail::open_out(path);
  std::fprintf(f.get(), "t,r,re,im\n");
  for (const auto& st : states) {
    const RadialGrid& g = *st.omega.grid;
    for (int i = 0; i < g.size(); ++i)
      std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g\n", st.t, g.r[i],
                   st.omega.v[i].real(), st.omega.v[i].imag());
  }
}

inline void write_damping_csv(const std::string& path, const DampingReport& rep) {
  auto f = detail::open_out(path);
  std::fprintf(f.get(), "t,psi_norm,rur_norm,rutheta_norm\n");
  for (std::size_t i = 0; i < rep.ts.size(); ++i)
    std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g\n", rep.ts[i],
                 rep.psi_norm[i], rep.rur_norm[i], rep.rutheta_norm[i]);
}

inline void write_depletion_csv(const std::string& path,
                                const DepletionReport& rep) {
  auto f = detail::open_out(path);
  std::fprintf(f.get(), "t,slope,stderr\n");
  for (std::size_t i = 0; i < rep.ts.size(); ++i)
    std::fprintf(f.get(), "%.17g,%.17g,%.17g\n", rep.ts[i], rep.slopes[i],
                 rep.slope_errs[i]);
}

inline void write_scattering_csv(const std::string& path,
                                 const ScatteringReport& rep) {
  auto f = detail::open_out(path);
  std::fprintf(f.get(), "t,increment\n");
  for (std::size_t i = 0; i < rep.ts.size(); ++i)
    std::fprintf(f.get(), "%.17g,%.17g\n", rep.ts[i], rep.increments[i]);
}

inline void write_decomposition_csv(const std::string& path,
                                    const std::vector<FDecomposition>& decs) {
  auto f = detail::open_out(path);
  std::fprintf(f.get(), "t,eps,norm_f1,norm_f2,norm_fS,norm_fE\n");
  for (const auto& d : decs)
    std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", d.t, d.eps,
                 d.norm_f1, d.norm_f2, d.norm_fS, d.norm_fE);
}

// Resolvent internals at a single spectral parameter z: the anchored
// homogeneous solution and the two Green's branches on the solver grid go to
// CSV, the Wronskian and self-cancellation residuals of each branch to JSON.
inline json write_spectral_point_dump(const std::string& csv_path,
                                      const std::string& json_path,
                                      const RadialVortex& vort, int k,
                                      complexd z, const RadialGrid& base) {
  const GreensData gd = build_greens(homogeneous_phi(vort, k, z, base));
  const RadialGrid& g = *gd.hom.sg.grid;
  const int n = g.size();

  {
    auto f = detail::open_out(csv_path);
    std::fprintf(f.get(), "r,phi_re,phi_im,h0_re,h0_im,hinf_re,hinf_im\n");
    for (int i = 0; i < n; ++i)
      std::fprintf(f.get(), "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                   g.r[i], gd.hom.phi[i].real(), gd.hom.phi[i].imag(),
                   gd.H0[i].real(), gd.H0[i].imag(), gd.Hinf[i].real(),
                   gd.Hinf[i].imag());
  }

  // how completely the second derivative cancels the potential term, away
  // from the critical layer where the finite difference cannot resolve it
  const auto branch_residual = [&](const std::vector<complexd>& H) {
    const auto d2 = derivative_samples(g, H, 2, 5);
    const double eps = std::abs(z.imag());
    double num = 0.0, den = 0.0;
    for (int i = 3; i < n - 3; ++i) {
      const double r = g.r[i];
      if (std::abs(vort.u(r) - z.real()) <= 3.0 * eps) continue;
      const complexd pot =
          complexd{(0.25 - static_cast<double>(k) * k) / (r * r), 0.0} +
          vort.beta(r) / (complexd{vort.u(r), 0.0} - z);
      const complexd a = d2[i], b = pot * H[i];
      num += std::norm(a + b) * g.w[i];
      den += (std::norm(a) + std::norm(b)) * g.w[i];
    }
    return den > 0.0 ? std::sqrt(num / den) : 0.0;
  };

  json summary;
  summary["z"] = {{"re", z.real()}, {"im", z.imag()}};
  summary["k"] = k;
  summary["critical_radius"] = gd.hom.sg.r_c;
  summary["solver_nodes"] = n;
  summary["M"] = {{"re", gd.M.real()},
                  {"im", gd.M.imag()},
                  {"abs", std::abs(gd.M)}};
  summary["near_eigenvalue"] = gd.near_eigenvalue;
  summary["fixed_point"] = {{"iterations", gd.hom.iterations},
                            {"contraction", gd.hom.contraction},
                            {"converged", gd.hom.converged}};
  summary["residuals"] = {{"h0", branch_residual(gd.H0)},
                          {"hinf", branch_residual(gd.Hinf)}};
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot open for writing: " + json_path);
  out << summary.dump(2) << "\n";
  return summary;
}

inline std::string default_out_root() {
  if (const char* env = std::getenv("VORTEXLAB_OUT_ROOT")) return env;
  return "runs";
}

struct RunArtifacts {
  std::string dir;
  json manifest;
};

inline RunArtifacts write_run_outputs(const RunResult& res,
                                      const std::string& out_root) {
  namespace fs = std::filesystem;
  RunArtifacts art;
  const fs::path dir = fs::path(out_root) / res.cfg.name;
  fs::create_directories(dir);
  art.dir = dir.string();

  std::vector<std::string> outputs;
  std::vector<std::string> warnings = res.warnings;
  json extra;

  if (!res.states.empty()) {
    write_snapshots_csv((dir / "snapshots.csv").string(), res.states);
    outputs.push_back("snapshots.csv");
  }

  const auto& diag = res.cfg.diagnostics;
  if (diag.damping && !res.states.empty() &&
      res.states.front().psi.grid != nullptr) {
    try {
      const auto rep = damping_report(res.states, diag.damping_fit_lo,
                                      diag.damping_fit_hi, diag.weight_delta);
      write_damping_csv((dir / "damping.csv").string(), rep);
      outputs.push_back("damping.csv");
      extra["damping"] = {{"psi_slope", rep.psi_fit.slope},
                          {"rur_slope", rep.rur_fit.slope},
                          {"rutheta_slope", rep.rutheta_fit.slope}};
    } catch (const std::exception& e) {
      warnings.push_back(std::string("damping diagnostic skipped: ") + e.what());
    }
  }
  if (diag.depletion && !res.states.empty()) {
    try {
      const auto rep =
          depletion_report(res.vortex, res.states, diag.depletion_r_lo,
                           diag.depletion_r_hi, diag.depletion_t_min);
      write_depletion_csv((dir / "depletion.csv").string(), rep);
      outputs.push_back("depletion.csv");
      extra["depletion"] = {{"averaged_slope", rep.averaged.slope},
                            {"averaged_stderr", rep.averaged.stderr_slope}};
    } catch (const std::exception& e) {
      warnings.push_back(std::string("depletion diagnostic skipped: ") + e.what());
    }
  }
  if (diag.scattering && res.states.size() >= 3) {
    try {
      const auto rep = scattering_report(
          res.vortex, res.states, WeightSpec{WeightFamily::f, diag.weight_delta});
      write_scattering_csv((dir / "scattering.csv").string(), rep);
      outputs.push_back("scattering.csv");
      extra["scattering"] = {{"tail_slope", rep.tail.slope},
                             {"tail_decreasing", rep.tail_decreasing}};
    } catch (const std::exception& e) {
      warnings.push_back(std::string("scattering diagnostic skipped: ") + e.what());
    }
  }
  if (!res.decompositions.empty()) {
    write_decomposition_csv((dir / "decomposition.csv").string(),
                            res.decompositions);
    outputs.push_back("decomposition.csv");
  }
  if (res.cfg.engine == "contour" && !res.cfg.contour.dump_points.empty()) {
    json points = json::array();
    for (std::size_t i = 0; i < res.cfg.contour.dump_points.size(); ++i) {
      char stem[48];
      std::snprintf(stem, sizeof(stem), "spectral_point_%02zu", i);
      const complexd z{res.cfg.contour.dump_points[i], res.cfg.contour.eps};
      try {
        json s = write_spectral_point_dump((dir / (std::string(stem) + ".csv")).string(),
                                           (dir / (std::string(stem) + ".json")).string(),
                                           res.vortex, res.cfg.k, z,
                                           *res.initial.grid);
        outputs.push_back(std::string(stem) + ".csv");
        outputs.push_back(std::string(stem) + ".json");
        points.push_back(std::move(s));
      } catch (const std::exception& e) {
        warnings.push_back(std::string(stem) + " skipped: " + e.what());
      }
    }
    if (!points.empty()) extra["spectral_points"] = std::move(points);
  }

  json man;
  man["name"] = res.cfg.name;
  man["engine"] = res.cfg.engine;
  man["k"] = res.cfg.k;
  man["config"] = to_json(res.cfg);
  man["config_hash"] = config_hash_hex(res.cfg);
  man["snapshots"] = res.states.size();
  man["drift"] = {{"conserved_norm", res.max_beta_drift},
                  {"radial_moment", res.max_momentum_drift}};
  if (res.cfg.engine == "contour") {
    man["contour"] = {{"max_residual", res.contour_residual},
                      {"greens_solves", res.greens_solves},
                      {"bvp_solves", res.bvp_solves},
                      {"region_iii_empty", res.region_iii_empty}};
  }
  if (res.dt > 0.0) {
    man["dt"] = res.dt;
    man["steps"] = res.steps;
  }
  for (auto it = extra.begin(); it != extra.end(); ++it) man[it.key()] = *it;
  man["warnings"] = warnings;
  man["outputs"] = outputs;
  man["wall_seconds"] = res.wall_seconds;
  art.manifest = man;

  std::ofstream mf(dir / "manifest.json");
  mf << man.dump(2) << "\n";
  return art;
}

// ---------------------------------------------------------------------------
// Snapshot file comparison, for checking one engine against another.
// ---------------------------------------------------------------------------

struct SnapshotComparison {
  long rows = 0;
  double max_abs = 0.0;
  double rel_l2 = 0.0;
  double max_grid_mismatch = 0.0;
};

inline SnapshotComparison compare_snapshot_files(const std::string& path_a,
                                                 const std::string& path_b) {
  const auto a = detail::read_csv_columns(path_a, 4);
  const auto b = detail::read_csv_columns(path_b, 4);
  if (a[0].size() != b[0].size())
    throw std::runtime_error("snapshot files have different row counts");
  SnapshotComparison cmp;
  cmp.rows = static_cast<long>(a[0].size());
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a[0].size(); ++i) {
    cmp.max_grid_mismatch =
        std::max({cmp.max_grid_mismatch, std::abs(a[0][i] - b[0][i]),
                  std::abs(a[1][i] - b[1][i])});
    const complexd va{a[2][i], a[3][i]}, vb{b[2][i], b[3][i]};
    cmp.max_abs = std::max(cmp.max_abs, std::abs(va - vb));
    num += std::norm(va - vb);
    den += std::norm(va);
  }
  cmp.rel_l2 = std::sqrt(num / std::max(den, 1e-300));
  return cmp;
}

}  // namespace vortexlab
