#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "vortexlab/run_config.hpp"

namespace vl = vortexlab;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_root,
            int threads_override) {
  vl::RunConfig cfg = vl::load_run_config(config_path);
  if (threads_override > 0) cfg.threads = threads_override;
  const vl::RunResult res = vl::execute_run(cfg);
  const vl::RunArtifacts art = vl::write_run_outputs(res, out_root);

  std::printf("run %s: engine=%s k=%d snapshots=%zu\n", cfg.name.c_str(),
              cfg.engine.c_str(), cfg.k, res.states.size());
  if (cfg.engine == "timestep" || cfg.engine == "passive")
    std::printf("  conserved-norm drift %.3g, radial-moment drift %.3g, dt %.3g (%ld steps)\n",
                res.max_beta_drift, res.max_momentum_drift, res.dt, res.steps);
  if (cfg.engine == "contour")
    std::printf("  resolvent solves: %d greens + %d bvp, max residual %.3g\n",
                res.greens_solves, res.bvp_solves, res.contour_residual);
  for (const auto key : {"damping", "depletion", "scattering"})
    if (art.manifest.contains(key))
      std::printf("  %s: %s\n", key, art.manifest[key].dump().c_str());
  for (const auto& w : art.manifest["warnings"])
    std::printf("  warning: %s\n", w.get<std::string>().c_str());
  std::printf("  wrote %s (%zu files + manifest.json), wall %.2f s\n",
              art.dir.c_str(), art.manifest["outputs"].size(), res.wall_seconds);
  return 0;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                double tol) {
  const auto cmp = vl::compare_snapshot_files(path_a, path_b);
  std::printf("compared %ld rows: max abs diff %.6g, rel l2 %.6g, grid mismatch %.3g\n",
              cmp.rows, cmp.max_abs, cmp.rel_l2, cmp.max_grid_mismatch);
  if (tol > 0.0 && cmp.rel_l2 > tol) {
    std::printf("FAIL: rel l2 %.6g exceeds tolerance %.6g\n", cmp.rel_l2, tol);
    return 2;
  }
  return 0;
}

int cmd_validate(const std::string& file, double circulation, double core_radius,
                 double r_min, double r_max, int n) {
  vl::VortexConfig vc;
  if (!file.empty()) {
    vc.family = "tabulated";
    vc.file = file;
  } else {
    vc.circulation = circulation;
    vc.core_radius = core_radius;
  }
  const vl::RadialVortex vort = vl::build_vortex(vc);
  const auto grid = vl::make_geometric_grid(r_min, r_max, n);
  const auto val = vl::validate_vortex(vort, *grid);
  std::printf("profile %s: u(0+)=%.6g, beta(0+)=%.6g, circulation=%.6g\n",
              vort.family.c_str(), vort.u0, vort.beta0, vort.circulation);
  std::printf("  identity residual %.3g, tail slopes omega %.2f beta %.2f\n",
              val.max_identity_residual, val.omega_tail_slope,
              val.beta_tail_slope);
  if (val.ok) {
    std::printf("  OK: positive, strictly decreasing, identity holds\n");
    return 0;
  }
  for (const auto& v : val.violations) std::printf("  violation: %s\n", v.c_str());
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectral and time-domain solvers for a single azimuthal mode "
               "riding on a radially decreasing vortex"};
  app.require_subcommand(1);

  std::string config_path, out_root = vl::default_out_root();
  int threads = 0;
  auto* run = app.add_subcommand("run", "execute a run described by a JSON config");
  run->add_option("config", config_path, "path to the run config")->required();
  run->add_option("--out-root", out_root, "directory that receives run outputs");
  run->add_option("--threads", threads, "worker threads for resolvent sweeps");

  std::string cmp_a, cmp_b;
  double cmp_tol = 0.0;
  auto* cmp = app.add_subcommand("compare", "diff two snapshot CSV files");
  cmp->add_option("a", cmp_a, "first snapshots.csv")->required();
  cmp->add_option("b", cmp_b, "second snapshots.csv")->required();
  cmp->add_option("--tol", cmp_tol, "fail (exit 2) if relative l2 exceeds this");

  std::string vfile;
  double vcirc = 2.0 * vl::kPi, vcore = 1.0, vrmin = 1e-3, vrmax = 60.0;
  int vn = 1024;
  auto* val = app.add_subcommand("validate-vortex",
                                 "check a vorticity profile for admissibility");
  val->add_option("--file", vfile, "tabulated profile CSV (r, omega)");
  val->add_option("--circulation", vcirc, "gaussian profile circulation");
  val->add_option("--core-radius", vcore, "gaussian profile core radius");
  val->add_option("--r-min", vrmin, "grid inner radius");
  val->add_option("--r-max", vrmax, "grid outer radius");
  val->add_option("--n", vn, "grid size");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_root, threads);
    if (cmp->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_tol);
    if (val->parsed())
      return cmd_validate(vfile, vcirc, vcore, vrmin, vrmax, vn);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
