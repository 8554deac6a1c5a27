#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "mfg/config.hpp"
#include "mfg/fixpoint.hpp"
#include "mfg/gdiff.hpp"
#include "mfg/hjb.hpp"
#include "mfg/oc.hpp"
#include "mfg/transport.hpp"
#include "mfg/viscous.hpp"

namespace fs = std::filesystem;
using namespace mfg;

namespace {

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  int seed = -1;  // -1: keep the config's seed
  int threads = 1;
};

struct Run {
  Common& c;
  ParsedConfig cfg;
  RunManifest manifest;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  explicit Run(Common& common, const std::string& subcommand) : c(common) {
    cfg = parse_config(c.config_path);
    if (c.seed >= 0) {
      cfg.settings.seed = c.seed;
      cfg.keys["seed"] = std::to_string(c.seed);
    }
    fs::create_directories(c.out_dir);
    manifest.subcommand = subcommand;
    manifest.config_hash = config_hash(cfg);
    manifest.seed = cfg.settings.seed;
    std::ofstream canon(path("config.canonical"));
    canon << canonical_config(cfg);
    manifest.outputs.push_back("config.canonical");
  }

  std::string path(const std::string& name) { return (fs::path(c.out_dir) / name).string(); }
  void emit(const std::string& name) { manifest.outputs.push_back(name); }
  void finish() {
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    manifest.outputs.push_back("manifest.json");
    write_manifest(path("manifest.json"), manifest);
  }
};

void write_feedback_csv(const std::string& p, const Grid& g, const FeedbackSlice& fb) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot open " + p);
  out << "x1,x2,alpha1,alpha2\n";
  for (int i = 0; i < g.n1; ++i)
    for (int j = 0; j < g.n2; ++j)
      out << fmt_g17(g.x1(i)) << ',' << fmt_g17(g.x2(j)) << ',' << fmt_g17(fb.a1[g.index(i, j)])
          << ',' << fmt_g17(fb.a2[g.index(i, j)]) << '\n';
}

MeasurePath frozen_m_path(const ParsedConfig& cfg) {
  TimeGrid tg = cfg.settings.make_time_grid(cfg.spec.T);
  return constant_path(tg, sample_m0(cfg.spec, cfg.settings.n_particles, cfg.settings.seed));
}

ValueFunctionPath hjb_solution(Run& run, bool write_outputs) {
  MeasurePath m = frozen_m_path(run.cfg);
  ValueFunctionPath u = solve_hjb(run.cfg.spec, run.cfg.settings, m);
  if (write_outputs) {
    const Grid& g = u.slices[0].grid;
    for (size_t k = 0; k < u.slices.size(); ++k) {
      std::string name = "u_t" + std::to_string(k) + ".csv";
      write_field_csv(run.path(name), u.slices[k]);
      run.emit(name);
    }
    for (size_t k = 0; k < u.feedback.size(); ++k) {
      std::string name = "alpha_t" + std::to_string(k) + ".csv";
      write_feedback_csv(run.path(name), g, u.feedback[k]);
      run.emit(name);
    }
    HjbDiagnostics d = hjb_diagnostics(u);
    std::ofstream out(run.path("diagnostics.csv"));
    out << "k,t,Linf,L_space,L_time,semiconcavity\n";
    for (size_t k = 0; k < d.t.size(); ++k)
      out << k << ',' << fmt_g17(d.t[k]) << ',' << fmt_g17(d.linf[k]) << ','
          << fmt_g17(d.L_space) << ',' << fmt_g17(d.L_time) << ','
          << fmt_g17(d.semiconcavity[k]) << '\n';
    run.emit("diagnostics.csv");
  }
  return u;
}

int cmd_solve_hjb(Common& c) {
  Run run(c, "solve-hjb");
  hjb_solution(run, true);
  run.finish();
  return 0;
}

int cmd_oc_trajectory(Common& c, std::string x0_text, double t, std::string p0_text,
                      int restarts) {
  Run run(c, "oc-trajectory");
  MeasurePath m = frozen_m_path(run.cfg);
  ValueFunctionPath u = solve_hjb(run.cfg.spec, run.cfg.settings, m);
  std::istringstream xin(x0_text);
  Vec2 x0;
  if (!(xin >> x0.x() >> x0.y())) throw ConfigError("--x0: expected two numbers");
  Vec2 p0 = seed_costate(run.cfg.spec, m, u, x0, t);
  if (!p0_text.empty()) {
    std::istringstream pin(p0_text);
    if (!(pin >> p0.x() >> p0.y())) throw ConfigError("--p0-guess: expected two numbers");
  }
  ShootingResult sr = shoot(run.cfg.spec, run.cfg.settings, m, x0, t, p0);
  if (!sr.converged && restarts > 1) {
    for (int j = 1; j < restarts && !sr.converged; ++j) {
      double th = 2.0 * M_PI * j / restarts;
      Vec2 g2 = p0 + (1.0 + p0.norm()) * Vec2{std::cos(th), std::sin(th)};
      ShootingResult alt = shoot(run.cfg.spec, run.cfg.settings, m, x0, t, g2);
      if (alt.residual < sr.residual) sr = std::move(alt);
    }
  }
  write_trajectory_csv(run.path("trajectory.csv"), sr.trajectory);
  run.emit("trajectory.csv");
  NecessaryConditionsReport rep = necessary_conditions_residual(run.cfg.spec, m, sr.trajectory);
  {
    std::ofstream out(run.path("residuals.csv"));
    out << "converged,newton_iters,shooting_residual,ode_residual,feedback_residual,"
           "maximality_gap,transversality\n";
    out << (sr.converged ? 1 : 0) << ',' << sr.newton_iters << ',' << fmt_g17(sr.residual) << ','
        << fmt_g17(rep.ode_residual) << ',' << fmt_g17(rep.feedback_residual) << ','
        << fmt_g17(rep.maximality_gap) << ',' << fmt_g17(rep.transversality) << '\n';
  }
  run.emit("residuals.csv");
  run.manifest.invariants["shooting_converged"] = sr.converged;
  run.finish();
  return sr.converged ? 0 : 3;
}

int cmd_solve_transport(Common& c) {
  Run run(c, "solve-transport");
  MeasurePath m = frozen_m_path(run.cfg);
  ValueFunctionPath u = solve_hjb(run.cfg.spec, run.cfg.settings, m);
  MeasurePath path = push_forward(run.cfg.spec, u, m.clouds[0]);
  for (size_t k = 0; k < path.clouds.size(); ++k) {
    std::string name = "m_t" + std::to_string(k) + ".csv";
    write_cloud_csv(run.path(name), path.clouds[k]);
    run.emit(name);
  }
  std::ofstream out(run.path("transport_diagnostics.csv"));
  out << "k,t,mass,moment2,d1_to_prev\n";
  for (size_t k = 0; k < path.clouds.size(); ++k) {
    double dd = (k == 0) ? 0.0 : d1(path.clouds[k - 1], path.clouds[k]);
    out << k << ',' << fmt_g17(path.time_grid.time(static_cast<int>(k))) << ','
        << fmt_g17(path.clouds[k].total_mass()) << ',' << fmt_g17(cloud_moment2(path.clouds[k]))
        << ',' << fmt_g17(dd) << '\n';
  }
  run.emit("transport_diagnostics.csv");
  run.finish();
  return 0;
}

int cmd_viscosity_sweep(Common& c, std::vector<double> sigmas) {
  Run run(c, "viscosity-sweep");
  if (sigmas.empty()) sigmas = {0.32, 0.16, 0.08, 0.04, 0.02, 0.01};
  MeasurePath m = frozen_m_path(run.cfg);
  SweepResult res = sigma_sweep(run.cfg.spec, run.cfg.settings, m, sigmas);
  std::ofstream out(run.path("viscous_report.csv"));
  out << "sigma,u_inf,du_inf,semiconcavity,m_inf,holder_quotient,moment2_max,"
         "dist_to_prev_sigma\n";
  for (const SweepRow& r : res.table)
    out << fmt_g17(r.sigma) << ',' << fmt_g17(r.est.u_inf) << ',' << fmt_g17(r.est.du_inf) << ','
        << fmt_g17(r.est.semiconcavity) << ',' << fmt_g17(r.est.m_inf) << ','
        << fmt_g17(r.est.holder_quotient) << ',' << fmt_g17(r.est.moment2_max) << ','
        << fmt_g17(r.dist_to_prev_sigma) << '\n';
  run.emit("viscous_report.csv");
  run.finish();
  return 0;
}

int cmd_solve_mfg(Common& c, double theta, double tol, int max_iters) {
  Run run(c, "solve-mfg");
  FixpointState state = solve_mfg(run.cfg.spec, run.cfg.settings, theta, tol, max_iters);
  HjbDiagnostics d = hjb_diagnostics(state.u);
  {
    std::ofstream out(run.path("fixpoint_log.csv"));
    out << "k,residual,u_inf,L_space\n";
    double u_inf = 0;
    for (double v : d.linf) u_inf = std::max(u_inf, v);
    for (size_t k = 0; k < state.residual_history.size(); ++k)
      out << k + 1 << ',' << fmt_g17(state.residual_history[k]) << ',' << fmt_g17(u_inf) << ','
          << fmt_g17(d.L_space) << '\n';
  }
  run.emit("fixpoint_log.csv");
  for (size_t k = 0; k < state.u.slices.size(); ++k) {
    std::string name = "u_t" + std::to_string(k) + ".csv";
    write_field_csv(run.path(name), state.u.slices[k]);
    run.emit(name);
  }
  for (size_t k = 0; k < state.m_path.clouds.size(); ++k) {
    std::string name = "m_t" + std::to_string(k) + ".csv";
    write_cloud_csv(run.path(name), state.m_path.clouds[k]);
    run.emit(name);
  }
  SolutionPairReport pair = check_solution_pair(run.cfg.spec, run.cfg.settings, state);
  {
    std::ofstream out(run.path("summary"));
    out << "converged = " << (state.converged ? 1 : 0) << "\n"
        << "iterations = " << state.iterate << "\n"
        << "residual = " << fmt_g17(state.residual) << "\n"
        << "theta = " << fmt_g17(state.theta) << "\n"
        << "hjb_consistency = " << fmt_g17(pair.hjb_consistency) << "\n"
        << "transport_residual = " << fmt_g17(pair.transport_residual) << "\n"
        << "L_space = " << fmt_g17(d.L_space) << "\n";
  }
  run.emit("summary");
  run.manifest.invariants["fixpoint_converged"] = state.converged;
  run.finish();
  return state.converged ? 0 : 3;
}

int cmd_gdiff_probe(Common& c, int n_points, int slice_index) {
  Run run(c, "gdiff-probe");
  MeasurePath m = frozen_m_path(run.cfg);
  ValueFunctionPath u = solve_hjb(run.cfg.spec, run.cfg.settings, m);
  if (slice_index < 0 || slice_index >= static_cast<int>(u.slices.size()))
    throw ConfigError("--slice-index out of range");
  const ScalarField& slice = u.slices[slice_index];
  const Grid& g = slice.grid;
  double ell = 4.0 * std::max(g.h1, g.h2);
  std::mt19937 rng(static_cast<unsigned>(run.cfg.settings.seed));
  std::uniform_real_distribution<double> ux(g.box.x1_min + 2 * ell, g.box.x1_max - 2 * ell);
  std::uniform_real_distribution<double> uy(g.box.x2_min + 2 * ell, g.box.x2_max - 2 * ell);
  double C = std::max(1.0, semiconcavity_diagnostic(slice));

  std::ofstream out(run.path("gdiff_report.csv"));
  out << "x1,x2,n_clusters,min_formula_gap,superdiff_violation,max_p2_at_degenerate\n";
  for (int k = 0; k < n_points; ++k) {
    GDiffProbe probe;
    probe.x = {ux(rng), uy(rng)};
    probe.u = &slice;
    probe.h = run.cfg.spec.h;
    probe.ell = ell;
    ReachableGradients rg = reachable_g_gradients(probe, probe.n_angular);
    MinFormulaReport mf = min_formula_check(probe, 16);
    double viol = 0;
    if (!rg.clusters.empty())
      viol = superdifferential_check(probe, rg.clusters[0], 16, C).violation;
    double p2 = 0;
    if (std::abs(run.cfg.spec.h(probe.x.x())) < 1e-9)
      for (const Vec2& p : rg.clusters) p2 = std::max(p2, std::abs(p.y()));
    out << fmt_g17(probe.x.x()) << ',' << fmt_g17(probe.x.y()) << ',' << rg.clusters.size() << ','
        << fmt_g17(mf.max_gap) << ',' << fmt_g17(viol) << ',' << fmt_g17(p2) << '\n';
  }
  run.emit("gdiff_report.csv");
  run.finish();
  return 0;
}

int cmd_check_invariants(Common& c) {
  InvariantReport rep = check_invariants(c.out_dir);
  write_invariant_report((fs::path(c.out_dir) / "invariants.csv").string(), rep);
  for (const auto& r : rep.rows)
    if (!r.pass)
      std::cerr << "invariant failed: " << r.name << " measured " << r.measured << " tol "
                << r.tolerance << "\n";
  return rep.all_pass() ? 0 : 4;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical solver and verification suite for first-order mean field games with "
               "degenerate Grushin-type dynamics"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--config", common.config_path, "problem/solver config file");
  app.add_option("--out", common.out_dir, "output directory");
  app.add_option("--seed", common.seed, "override the config seed");
  app.add_option("--threads", common.threads, "worker threads (solvers are deterministic)");

  auto* hjb = app.add_subcommand("solve-hjb", "backward semi-Lagrangian value function solve");
  auto* oc = app.add_subcommand("oc-trajectory", "Pontryagin shooting from one start point");
  std::string x0_text = "0 0", p0_text;
  double t_start = 0;
  int restarts = 1;
  oc->add_option("--x0", x0_text, "start point, two numbers");
  oc->add_option("--t", t_start, "start time");
  oc->add_option("--p0-guess", p0_text, "initial costate guess, two numbers");
  oc->add_option("--restarts", restarts, "extra Newton initializations");
  auto* tr = app.add_subcommand("solve-transport", "push-forward of m0 along the feedback flow");
  auto* vs = app.add_subcommand("viscosity-sweep", "sigma-regularized system over a sweep");
  std::vector<double> sigmas;
  vs->add_option("--sigmas", sigmas, "decreasing sigma values");
  auto* mfgc = app.add_subcommand("solve-mfg", "damped Picard iteration of the coupling map");
  double theta = 0.5, tol = 1e-3;
  int max_iters = 50;
  mfgc->add_option("--theta", theta, "damping in (0,1]");
  mfgc->add_option("--tol", tol, "d1 residual tolerance");
  mfgc->add_option("--max-iters", max_iters, "iteration cap");
  auto* gd = app.add_subcommand("gdiff-probe", "degenerate differential probes on a value slice");
  int n_points = 10, slice_index = 0;
  gd->add_option("--points", n_points, "number of random probe points");
  gd->add_option("--slice-index", slice_index, "time slice to probe");
  auto* ci = app.add_subcommand("check-invariants", "audit a finished run directory");

  // global flags may appear after the subcommand name
  for (CLI::App* sub : {hjb, oc, tr, vs, mfgc, gd, ci}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ci->parsed()) return cmd_check_invariants(common);
    if (common.config_path.empty()) throw ConfigError("--config is required");
    if (hjb->parsed()) return cmd_solve_hjb(common);
    if (oc->parsed()) return cmd_oc_trajectory(common, x0_text, t_start, p0_text, restarts);
    if (tr->parsed()) return cmd_solve_transport(common);
    if (vs->parsed()) return cmd_viscosity_sweep(common, sigmas);
    if (mfgc->parsed()) return cmd_solve_mfg(common, theta, tol, max_iters);
    if (gd->parsed()) return cmd_gdiff_probe(common, n_points, slice_index);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
