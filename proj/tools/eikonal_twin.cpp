// Command-line driver for the cardiac digital-twin pipeline.
//
//   eikonal-twin <command> --config FILE [--seed S] [--jobs J] [--out DIR]
//
//   genmesh    build the synthetic ventricle-in-torso anatomy
//   leads      solve lead fields and precompute per-lead projection vectors
//   gt         fabricate ground truth: hidden PMJs, activation map, target
//              ECG, optional BSPM snapshots
//   fit        one optimization run against a target ECG
//   ensemble   multi-start ensemble of fits
//   sweep      PMJ-count sweep (ensembles per N)
//   report     aggregate run records into CSV tables and SVG figures
//
// Exit codes: 0 success, 2 configuration/input error, 3 numerical failure.
// Paths inside the config file resolve relative to the config file's
// directory; --out overrides the output root verbatim.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "etwin/etwin.hpp"

namespace fs = std::filesystem;
using namespace etwin;

namespace {

struct CommonArgs {
  std::string config_path;
  long long seed = -1;  // <0: use config
  int jobs = 1;
  std::string out;      // empty: use config [output] dir
};

std::string resolve_path(const std::string& config_path, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(config_path).parent_path() / p).string();
}

std::string require_path(const ConfigFile& cfg, const std::string& section,
                         const std::string& key) {
  return resolve_path(cfg.source(), cfg.get(section, key));
}

std::string output_root(const ConfigFile& cfg, const CommonArgs& args) {
  if (!args.out.empty()) return args.out;
  return resolve_path(cfg.source(), cfg.get_or("output", "dir", "out"));
}

// ---- config -> domain structs ---------------------------------------------------

AnatomyParams anatomy_from_config(const ConfigFile& cfg) {
  AnatomyParams p;
  p.rx = cfg.get_double_or("mesh", "rx_mm", p.rx);
  p.ry = cfg.get_double_or("mesh", "ry_mm", p.ry);
  p.rz = cfg.get_double_or("mesh", "rz_mm", p.rz);
  p.wall = cfg.get_double_or("mesh", "wall_mm", p.wall);
  p.h_ventricle = cfg.get_double_or("mesh", "h_ventricle_mm", p.h_ventricle);
  p.h_torso = cfg.get_double_or("mesh", "h_torso_mm", p.h_torso);
  p.grading = cfg.get_double_or("mesh", "grading", p.grading);
  p.torso_lo.x = cfg.get_double_or("mesh", "torso_x0", p.torso_lo.x);
  p.torso_lo.y = cfg.get_double_or("mesh", "torso_y0", p.torso_lo.y);
  p.torso_lo.z = cfg.get_double_or("mesh", "torso_z0", p.torso_lo.z);
  p.torso_hi.x = cfg.get_double_or("mesh", "torso_x1", p.torso_hi.x);
  p.torso_hi.y = cfg.get_double_or("mesh", "torso_y1", p.torso_hi.y);
  p.torso_hi.z = cfg.get_double_or("mesh", "torso_z1", p.torso_hi.z);
  p.lungs = cfg.get_bool_or("mesh", "lungs", p.lungs);
  p.fiber_angle_endo =
      cfg.get_double_or("mesh", "fiber_angle_endo_deg", p.fiber_angle_endo);
  p.fiber_angle_epi =
      cfg.get_double_or("mesh", "fiber_angle_epi_deg", p.fiber_angle_epi);
  return p;
}

Conductivities conductivities_from_config(const ConfigFile& cfg) {
  Conductivities c;
  c.gi_f = cfg.get_double_or("conductivity", "gi_f", c.gi_f);
  c.gi_s = cfg.get_double_or("conductivity", "gi_s", c.gi_s);
  c.gi_n = cfg.get_double_or("conductivity", "gi_n", c.gi_n);
  c.ge_f = cfg.get_double_or("conductivity", "ge_f", c.ge_f);
  c.ge_s = cfg.get_double_or("conductivity", "ge_s", c.ge_s);
  c.ge_n = cfg.get_double_or("conductivity", "ge_n", c.ge_n);
  c.torso = cfg.get_double_or("conductivity", "torso", c.torso);
  c.blood = cfg.get_double_or("conductivity", "blood", c.blood);
  c.lung = cfg.get_double_or("conductivity", "lung", c.lung);
  return c;
}

FeasibleParams constraint_from_config(const ConfigFile& cfg) {
  FeasibleParams p;
  p.mode = parse_constraint_mode(cfg.get_or("constraint", "mode", "band"));
  p.d_pmj = cfg.get_double_or("constraint", "d_pmj_mm", p.d_pmj);
  p.basal_cutoff =
      cfg.get_double_or("constraint", "basal_cutoff", p.basal_cutoff);
  p.rv_inferior_mask =
      cfg.get_bool_or("constraint", "rv_inferior_mask", p.rv_inferior_mask);
  p.rv_center_deg =
      cfg.get_double_or("constraint", "rv_center_deg", p.rv_center_deg);
  p.rv_half_width_deg = cfg.get_double_or("constraint", "rv_half_width_deg",
                                          p.rv_half_width_deg);
  return p;
}

WaveformParams waveform_from_config(const ConfigFile& cfg) {
  WaveformParams w;
  w.v_rest = cfg.get_double_or("waveform", "v_rest_mv", w.v_rest);
  w.v_peak = cfg.get_double_or("waveform", "v_peak_mv", w.v_peak);
  w.eps = cfg.get_double_or("waveform", "eps_ms", w.eps);
  return w;
}

OptimizerConfig optimizer_from_config(const ConfigFile& cfg,
                                      const CommonArgs& args) {
  OptimizerConfig oc;
  oc.iterations =
      static_cast<int>(cfg.get_long_or("optimizer", "iterations", 400));
  oc.lr = cfg.get_double_or("optimizer", "lr", 0.75);
  oc.lr_position = cfg.get_double_or("optimizer", "lr_position", -1);
  oc.lr_timing = cfg.get_double_or("optimizer", "lr_timing", -1);
  oc.beta1 = cfg.get_double_or("optimizer", "beta1", 0.9);
  oc.beta2 = cfg.get_double_or("optimizer", "beta2", 0.999);
  oc.eps_adam = cfg.get_double_or("optimizer", "eps_adam", 1e-8);
  oc.n_pmj = static_cast<int>(cfg.get_long_or("optimizer", "n_pmj", 300));
  oc.seed = args.seed >= 0
                ? static_cast<std::uint64_t>(args.seed)
                : static_cast<std::uint64_t>(cfg.get_long_or("optimizer", "seed", 1));
  oc.solve.tolerance =
      cfg.get_double_or("optimizer", "solver_tolerance_ms", 1e-4);
  oc.solve.max_sweeps =
      static_cast<int>(cfg.get_long_or("optimizer", "max_sweeps", 5000));
  oc.solve.fista_iters =
      static_cast<int>(cfg.get_long_or("optimizer", "fista_iters", 10));
  oc.waveform = waveform_from_config(cfg);
  oc.early_stop = cfg.get_bool_or("optimizer", "early_stop", false);
  oc.early_stop_rel = cfg.get_double_or("optimizer", "early_stop_rel", 0.05);
  return oc;
}

// ---- shared loading --------------------------------------------------------------

struct Workbench {
  MeshFile full;            // full anatomy + fiber frames
  Submesh heart;            // myocardium extraction
  VelocityField vel_heart;  // frames restricted to the heart, speeds applied
};

VelocityField velocities_from_config(const ConfigFile& cfg,
                                     const VelocityField& frames,
                                     const Submesh& heart,
                                     double cv_scale = 1.0) {
  VelocityField v;
  const int nt = heart.mesh.tet_count();
  v.fiber.resize(nt);
  v.sheet.resize(nt);
  v.normal.resize(nt);
  for (int t = 0; t < nt; ++t) {
    int pt = heart.tet_to_parent[t];
    v.fiber[t] = frames.fiber[pt];
    v.sheet[t] = frames.sheet[pt];
    v.normal[t] = frames.normal[pt];
  }
  v.vf = cv_scale * cfg.get_double_or("velocity", "vf", 0.61);
  v.vs = cv_scale * cfg.get_double_or("velocity", "vs", 0.225);
  v.vn = cv_scale * cfg.get_double_or("velocity", "vn", 0.225);
  return v;
}

Workbench load_workbench(const ConfigFile& cfg, double cv_scale = 1.0) {
  Workbench wb;
  std::string mesh_path = require_path(cfg, "mesh", "file");
  wb.full = read_mesh(mesh_path);
  if (!wb.full.has_fibers)
    throw ConfigError(mesh_path + ": mesh has no fiber frames; run genmesh");
  wb.heart = wb.full.mesh.extract_region(kRegionVentricle);
  if (wb.heart.mesh.tet_count() == 0)
    throw ConfigError(mesh_path + ": no myocardial elements");
  wb.vel_heart =
      velocities_from_config(cfg, wb.full.velocity, wb.heart, cv_scale);
  return wb;
}

LeadSet load_leadset(const ConfigFile& cfg, const Workbench& wb) {
  std::string path = require_path(cfg, "leads", "file");
  LeadSet ls = read_leadset(path);
  if (ls.b.vertex_count != wb.heart.mesh.vertex_count())
    throw ConfigError(path + ": lead vectors were built for a different mesh (" +
                      std::to_string(ls.b.vertex_count) + " heart vertices vs " +
                      std::to_string(wb.heart.mesh.vertex_count()) + ")");
  return ls;
}

std::vector<int> skin_vertex_list(const TetMesh& mesh) {
  std::set<int> s;
  for (const auto& tri : mesh.surface("torso_skin"))
    for (int k = 0; k < 3; ++k) s.insert(tri[k]);
  return std::vector<int>(s.begin(), s.end());
}

// Simple activity-window estimate of a trace: span where any lead exceeds
// 5% of the global absolute maximum.
double trace_active_duration(const EcgTrace& t) {
  double gmax = 0;
  for (const auto& lead : t.lead)
    for (double v : lead) gmax = std::max(gmax, std::abs(v));
  if (!(gmax > 0)) return 0;
  double thresh = 0.05 * gmax;
  int first = -1, last = -1;
  for (int k = 0; k < t.grid.count(); ++k) {
    bool on = false;
    for (const auto& lead : t.lead)
      if (std::abs(lead[k]) > thresh) { on = true; break; }
    if (on) {
      if (first < 0) first = k;
      last = k;
    }
  }
  if (first < 0) return 0;
  return (last - first) * t.grid.dt;
}

std::map<std::string, std::string> run_meta(const ConfigFile& cfg,
                                            const FeasibleParams& fp,
                                            const std::string& layout,
                                            int n_pmj) {
  std::map<std::string, std::string> m;
  m["config_hash"] = std::to_string(cfg.canonical_hash());
  m["constraint"] =
      fp.mode == ConstraintMode::kBand ? "band" : "unrestricted";
  m["leads"] = layout;
  m["n_pmj"] = std::to_string(n_pmj);
  return m;
}

void add_fit_metrics(std::map<std::string, std::string>& meta,
                     const RunRecord& rec, const EcgTrace& target) {
  if (rec.final_ecg.lead_count() == 0) return;
  meta["dist_ecg"] = format_double(dist_ecg(rec.final_ecg, target));
  meta["rel_dist_ecg"] = format_double(rel_dist_ecg(rec.final_ecg, target));
  meta["pearson"] = format_double(pearson(rec.final_ecg, target));
}

// ---- commands --------------------------------------------------------------------

void cmd_genmesh(const CommonArgs& args) {
  ConfigFile cfg = ConfigFile::from_file(args.config_path);
  AnatomyParams prm = anatomy_from_config(cfg);
  std::printf("building synthetic anatomy (h_ventricle=%g mm, h_torso=%g mm)\n",
              prm.h_ventricle, prm.h_torso);
  Anatomy an = build_anatomy(prm);
  const TetMesh& m = an.mesh;

  Submesh heart = m.extract_region(kRegionVentricle);
  double shell = heart.mesh.total_volume();
  double analytic = prm.shell_volume();
  std::printf("mesh: %d vertices, %d tets (%d myocardial)\n", m.vertex_count(),
              m.tet_count(), heart.mesh.tet_count());
  std::printf("myocardial volume %.1f mm^3 vs analytic %.1f mm^3 (%4.2f%%)\n",
              shell, analytic, 100.0 * std::abs(shell - analytic) / analytic);

  std::string path = require_path(cfg, "mesh", "file");
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? "."
                             : fs::path(path).parent_path().string());
  write_mesh(path, m, &an.velocity);
  std::printf("wrote %s\n", path.c_str());

  if (cfg.get_bool_or("mesh", "write_vtk", false)) {
    std::string vtk = path + ".vtk";
    write_vtk(vtk, m, {}, {});
    std::printf("wrote %s\n", vtk.c_str());
  }
}

void cmd_leads(const CommonArgs& args) {
  ConfigFile cfg = ConfigFile::from_file(args.config_path);
  Workbench wb = load_workbench(cfg);
  Conductivities cond = conductivities_from_config(cfg);
  std::string layout_kind = cfg.get_or("leads", "layout", "ecg12");

  std::printf("assembling torso operator (%d vertices)\n",
              wb.full.mesh.vertex_count());
  TorsoFem fem(wb.full.mesh, wb.full.velocity, cond);
  LeadLayout layout = build_layout(wb.full.mesh, layout_kind);
  FemOptions fo;
  fo.tol = cfg.get_double_or("leads", "cg_tol", 1e-10);
  double scale = cfg.get_double_or("leads", "scale", 0.32);
  std::printf("solving %zu electrode fields for %zu leads\n",
              layout.electrodes.size(), layout.leads.size());
  LeadSet ls = fem.build_leadset(layout, wb.heart, scale, fo);

  for (std::size_t l = 0; l < ls.b.rows.size(); ++l) {
    double sum = 0, amax = 0;
    for (double v : ls.b.rows[l]) {
      sum += v;
      amax = std::max(amax, std::abs(v));
    }
    std::printf("  lead %-4s sum(B)=%+.3e  max|B|=%.3e\n",
                ls.b.names[l].c_str(), sum, amax);
  }
  std::string path = require_path(cfg, "leads", "file");
  fs::create_directories(fs::path(path).parent_path().empty()
                             ? "."
                             : fs::path(path).parent_path().string());
  write_leadset(path, ls);
  std::printf("wrote %s\n", path.c_str());
}

void cmd_gt(const CommonArgs& args) {
  ConfigFile cfg = ConfigFile::from_file(args.config_path);
  double cv_scale = 1.0 + cfg.get_double_or("gt", "cv_perturb_pct", 0) / 100.0;
  Workbench wb = load_workbench(cfg, cv_scale);
  LeadSet ls = load_leadset(cfg, wb);
  WaveformParams wf = waveform_from_config(cfg);

  std::uint64_t seed = args.seed >= 0
                           ? static_cast<std::uint64_t>(args.seed)
                           : static_cast<std::uint64_t>(cfg.get_long_or("gt", "seed", 7));
  int n_hidden = static_cast<int>(cfg.get_long_or("gt", "n_hidden", 20));
  double t_lo = cfg.get_double_or("gt", "t_hidden_lo_ms", 0);
  double t_hi = cfg.get_double_or("gt", "t_hidden_hi_ms", 20);

  // hidden PMJs are subendocardial: band-mode region regardless of the
  // fitting constraint, with the same masking geometry
  FeasibleParams fp = constraint_from_config(cfg);
  fp.mode = ConstraintMode::kBand;
  FeasibleRegion region(wb.heart.mesh, fp);
  Rng rng(seed);
  PMJSet hidden = region.sample_initial(n_hidden, t_lo, t_hi, rng);

  EikonalSolver solver(wb.heart.mesh, wb.vel_heart);
  SolveOptions so;
  so.tolerance = cfg.get_double_or("gt", "solver_tolerance_ms", 1e-4);
  ActivationMap act = solver.solve(hidden, so);
  double tau_max = 0;
  for (double t : act.tau)
    if (std::isfinite(t)) tau_max = std::max(tau_max, t);

  double dt = cfg.get_double_or("gt", "dt_ms", 0.5);
  double guard = cfg.get_double_or("gt", "guard_ms", 10);
  TemporalGrid grid = TemporalGrid::covering(0, tau_max + 4 * wf.eps + guard, dt);
  EcgTrace target = ecg_from_activation(ls.b, act.tau, grid, wf);

  double noise = cfg.get_double_or("gt", "noise_mv", 0);
  if (noise > 0) {
    Rng noise_rng(rng.child_seed());
    for (auto& lead : target.lead)
      for (double& v : lead) v += noise * noise_rng.normal();
  }

  std::string dir = output_root(cfg, args) + "/gt";
  fs::create_directories(dir);
  write_ecg_csv(dir + "/ecg_target.csv", target);
  {
    CsvWriter w(dir + "/tau_gt.csv");
    w.row({"vertex_id", "tau_ms"});
    for (std::size_t v = 0; v < act.tau.size(); ++v)
      w.row({std::to_string(v), format_double(act.tau[v])});
  }
  write_activation_csv(dir + "/activation_gt.csv", act);
  if (cfg.get_bool_or("gt", "vtk", false))
    write_activation_vtk(dir + "/activation_gt.vtk", wb.heart.mesh, act);
  {
    CsvWriter w(dir + "/hidden_pmjs.csv");
    w.row({"id", "x_mm", "y_mm", "z_mm", "t_ms", "active"});
    for (int j = 0; j < hidden.size(); ++j)
      w.row({std::to_string(j), format_double(hidden[j].pos.x),
             format_double(hidden[j].pos.y), format_double(hidden[j].pos.z),
             format_double(hidden[j].t), act.pmj_active[j] ? "1" : "0"});
  }

  double qrs = trace_active_duration(target);
  std::map<std::string, std::string> meta;
  meta["code_version"] = kCodeVersion;
  meta["config_hash"] = std::to_string(cfg.canonical_hash());
  meta["seed"] = std::to_string(seed);
  meta["n_hidden"] = std::to_string(n_hidden);
  meta["tau_max_ms"] = format_double(tau_max);
  meta["qrs_estimate_ms"] = format_double(qrs);
  meta["cv_scale"] = format_double(cv_scale);
  meta["noise_mv"] = format_double(noise);
  meta["grid_t0"] = format_double(grid.t0);
  meta["grid_dt"] = format_double(grid.dt);
  meta["grid_n_t"] = std::to_string(grid.n_t);
  write_meta(dir + "/meta", meta);
  std::printf("gt: max tau %.2f ms, active window %.1f ms, %d samples\n",
              tau_max, qrs, grid.count());

  if (cfg.get_bool_or("gt", "bspm", false)) {
    Conductivities cond = conductivities_from_config(cfg);
    TorsoFem fem(wb.full.mesh, wb.full.velocity, cond);
    int stride = static_cast<int>(cfg.get_long_or("gt", "bspm_stride", 4));
    stride = std::max(1, stride);
    BspmSeries series;
    series.grid.t0 = grid.t0;
    series.grid.dt = grid.dt * stride;
    series.grid.n_t = grid.n_t / stride;
    series.vertices = skin_vertex_list(wb.full.mesh);
    FemOptions fo;
    fo.tol = cfg.get_double_or("leads", "cg_tol", 1e-10);
    std::vector<double> vm(wb.heart.mesh.vertex_count());
    std::vector<double> phi, warm;
    for (int k = 0; k < series.grid.count(); ++k) {
      double t = series.grid.time(k);
      for (int v = 0; v < wb.heart.mesh.vertex_count(); ++v)
        vm[v] = transmembrane(t, act.tau[v], wf);
      phi = fem.pseudo_bidomain(vm, wb.heart, fo,
                                warm.empty() ? nullptr : &warm);
      warm = phi;
      std::vector<double> snap(series.vertices.size());
      for (std::size_t i = 0; i < series.vertices.size(); ++i)
        snap[i] = phi[series.vertices[i]];
      series.phi.push_back(std::move(snap));
      std::printf("\r  bspm %d/%d", k + 1, series.grid.count());
      std::fflush(stdout);
    }
    std::printf("\n");
    write_bspm_series(dir + "/bspm", series);
    std::printf("wrote %s/bspm\n", dir.c_str());
  }
}

void write_one_run(const std::string& dir, const RunRecord& rec,
                   const ConfigFile& cfg, const FeasibleParams& fp,
                   const std::string& layout, const EcgTrace& target,
                   int run_index = -1) {
  auto meta = run_meta(cfg, fp, layout, rec.final_pmjs.size());
  add_fit_metrics(meta, rec, target);
  if (run_index >= 0) meta["run_index"] = std::to_string(run_index);
  write_run_record(dir, rec, meta);
}

void cmd_fit(const CommonArgs& args) {
  ConfigFile cfg = ConfigFile::from_file(args.config_path);
  Workbench wb = load_workbench(cfg);
  LeadSet ls = load_leadset(cfg, wb);
  EcgTrace target = read_ecg_csv(require_path(cfg, "target", "ecg"));
  FeasibleParams fp = constraint_from_config(cfg);
  FeasibleRegion region(wb.heart.mesh, fp);
  EikonalSolver solver(wb.heart.mesh, wb.vel_heart);
  OptimizerConfig oc = optimizer_from_config(cfg, args);

  std::printf("fit: n_pmj=%d iterations=%d seed=%llu (%s)\n", oc.n_pmj,
              oc.iterations, static_cast<unsigned long long>(oc.seed),
              fp.mode == ConstraintMode::kBand ? "band" : "unrestricted");
  int report_every = std::max(1, oc.iterations / 10);
  RunRecord rec = optimize(solver, region, ls.b, target, oc, nullptr,
                           [&](int it, double loss, const PMJSet&) {
                             if (it % report_every == 0)
                               std::printf("  iter %4d  loss %.6e\n", it, loss);
                           });

  std::string dir = output_root(cfg, args) + "/fit_seed" +
                    std::to_string(oc.seed);
  if (!args.out.empty()) dir = args.out;
  write_one_run(dir, rec, cfg, fp, ls.layout.kind, target);
  std::printf("best loss %.6e at iteration %d; wrote %s\n", rec.best_loss,
              rec.best_iteration, dir.c_str());
  if (rec.aborted)
    throw NumericError("fit aborted: " + rec.abort_reason);
}

void cmd_ensemble(const CommonArgs& args) {
  ConfigFile cfg = ConfigFile::from_file(args.config_path);
  Workbench wb = load_workbench(cfg);
  LeadSet ls = load_leadset(cfg, wb);
  EcgTrace target = read_ecg_csv(require_path(cfg, "target", "ecg"));
  FeasibleParams fp = constraint_from_config(cfg);
  FeasibleRegion region(wb.heart.mesh, fp);
  EikonalSolver solver(wb.heart.mesh, wb.vel_heart);
  OptimizerConfig oc = optimizer_from_config(cfg, args);

  int count = static_cast<int>(cfg.get_long_or("ensemble", "count", 20));
  std::uint64_t base_seed =
      args.seed >= 0 ? static_cast<std::uint64_t>(args.seed)
                     : static_cast<std::uint64_t>(
                           cfg.get_long_or("ensemble", "seed", oc.seed));

  std::string mode_name =
      fp.mode == ConstraintMode::kBand ? "band" : "unrestricted";
  std::string root = output_root(cfg, args) + "/ensemble_" + mode_name;
  if (!args.out.empty()) root = args.out;
  std::printf("ensemble: %d runs (%s), base seed %llu, jobs %d\n", count,
              mode_name.c_str(), static_cast<unsigned long long>(base_seed),
              args.jobs);

  std::vector<RunRecord> recs = run_ensemble(
      solver, region, ls.b, target, oc, count, base_seed, args.jobs,
      [&](int run, const RunRecord& r) {
        std::printf("  run %02d: best loss %.6e (iter %d)%s\n", run,
                    r.best_loss, r.best_iteration,
                    r.aborted ? " [aborted]" : "");
      });

  char name[32];
  CsvWriter summary(root + (fs::create_directories(root), "/summary.csv"));
  summary.row({"run", "seed", "aborted", "best_loss", "dist_ecg",
               "rel_dist_ecg", "pearson"});
  std::vector<const std::vector<double>*> taus;
  std::vector<const EcgTrace*> traces;
  for (int i = 0; i < count; ++i) {
    std::snprintf(name, sizeof(name), "/run_%02d", i);
    write_one_run(root + name, recs[i], cfg, fp, ls.layout.kind, target, i);
    const RunRecord& r = recs[i];
    std::vector<std::string> row{std::to_string(i), std::to_string(r.seed),
                                 r.aborted ? "1" : "0",
                                 format_double(r.best_loss)};
    if (!r.aborted && r.final_ecg.lead_count() > 0) {
      row.push_back(format_double(dist_ecg(r.final_ecg, target)));
      row.push_back(format_double(rel_dist_ecg(r.final_ecg, target)));
      row.push_back(format_double(pearson(r.final_ecg, target)));
      taus.push_back(&r.final_act.tau);
      traces.push_back(&r.final_ecg);
    } else {
      row.insert(row.end(), {"", "", ""});
    }
    summary.row(row);
  }

  if (taus.size() >= 2) {
    EnsembleStats st = ensemble_stats(taus, traces,
                                      wb.heart.mesh.lumped_vertex_volumes());
    std::map<std::string, std::string> meta;
    meta["tau_sigma_bar_ms"] = format_double(st.tau_std_bar);
    meta["representative"] = std::to_string(st.representative);
    meta["max_pair_lat"] = std::to_string(st.max_pair_lat.i) + "," +
                           std::to_string(st.max_pair_lat.j) + "," +
                           format_double(st.max_pair_lat.value);
    meta["min_pair_lat"] = std::to_string(st.min_pair_lat.i) + "," +
                           std::to_string(st.min_pair_lat.j) + "," +
                           format_double(st.min_pair_lat.value);
    meta["config_hash"] = std::to_string(cfg.canonical_hash());
    write_meta(root + "/ensemble_meta", meta);
    CsvWriter w(root + "/tau_stats.csv");
    w.row({"vertex_id", "tau_mean_ms", "tau_std_ms"});
    for (std::size_t v = 0; v < st.tau_mean.size(); ++v)
      w.row({std::to_string(v), format_double(st.tau_mean[v]),
             format_double(st.tau_std[v])});
    std::printf("tau_sigma_bar %.3f ms; lat pair spread %.3f..%.3f ms\n",
                st.tau_std_bar, st.min_pair_lat.value, st.max_pair_lat.value);
  }
  std::printf("wrote %s\n", root.c_str());
}

void cmd_sweep(const CommonArgs& args) {
  ConfigFile cfg = ConfigFile::from_file(args.config_path);
  Workbench wb = load_workbench(cfg);
  LeadSet ls = load_leadset(cfg, wb);
  EcgTrace target = read_ecg_csv(require_path(cfg, "target", "ecg"));
  FeasibleParams fp = constraint_from_config(cfg);
  FeasibleRegion region(wb.heart.mesh, fp);
  EikonalSolver solver(wb.heart.mesh, wb.vel_heart);
  OptimizerConfig oc = optimizer_from_config(cfg, args);

  std::vector<int> n_values = cfg.has("sweep", "n_values")
                                  ? cfg.get_int_list("sweep", "n_values")
                                  : std::vector<int>{1, 10, 50, 100, 300};
  int runs_per_n =
      static_cast<int>(cfg.get_long_or("sweep", "runs_per_n", 5));
  std::uint64_t base_seed =
      args.seed >= 0 ? static_cast<std::uint64_t>(args.seed)
                     : static_cast<std::uint64_t>(
                           cfg.get_long_or("sweep", "seed", oc.seed));

  std::string root = output_root(cfg, args) + "/sweep";
  if (!args.out.empty()) root = args.out;
  fs::create_directories(root);
  std::printf("sweep over %zu PMJ counts, %d runs each\n", n_values.size(),
              runs_per_n);

  std::vector<SweepCell> cells =
      sweep_pmj_count(solver, region, ls.b, target, oc, n_values, runs_per_n,
                      base_seed, args.jobs);

  CsvWriter w(root + "/sweep_summary.csv");
  w.row({"n_pmj", "median_dist_ecg", "median_rel_dist_ecg",
         "mean_active_fraction", "mean_roi95_share"});
  char name[48];
  for (const auto& cell : cells) {
    for (std::size_t i = 0; i < cell.runs.size(); ++i) {
      std::snprintf(name, sizeof(name), "/n_%04d/run_%02d", cell.n_pmj,
                    static_cast<int>(i));
      write_one_run(root + name, cell.runs[i], cfg, fp, ls.layout.kind,
                    target, static_cast<int>(i));
    }
    w.row({std::to_string(cell.n_pmj), format_double(cell.median_dist_ecg),
           format_double(cell.median_rel_dist_ecg),
           format_double(cell.mean_active_fraction),
           format_double(cell.mean_roi95_share)});
    std::printf("  N=%-5d median rel dist %.4f, active %.2f, roi95 %.2f\n",
                cell.n_pmj, cell.median_rel_dist_ecg,
                cell.mean_active_fraction, cell.mean_roi95_share);
  }
  std::printf("wrote %s\n", root.c_str());
}

struct CellKey {
  std::string constraint, leads;
  int n_pmj = 0;
  bool operator<(const CellKey& o) const {
    if (constraint != o.constraint) return constraint < o.constraint;
    if (leads != o.leads) return leads < o.leads;
    return n_pmj < o.n_pmj;
  }
};

void cmd_report(const CommonArgs& args, bool score_vs_gt) {
  ConfigFile cfg = ConfigFile::from_file(args.config_path);
  std::string out_root = output_root(cfg, args);
  std::string report_dir = out_root + "/report";
  fs::create_directories(report_dir);

  // collect run directories (any directory holding a 'meta' + 'loss.csv')
  std::vector<std::string> roots;
  if (cfg.has("report", "roots")) {
    std::istringstream ss(cfg.get("report", "roots"));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) roots.push_back(resolve_path(cfg.source(), item));
  } else {
    roots.push_back(out_root);
  }
  std::vector<std::string> run_dirs;
  for (const auto& root : roots) {
    if (!fs::exists(root)) continue;
    for (auto it = fs::recursive_directory_iterator(root);
         it != fs::recursive_directory_iterator(); ++it) {
      if (it->is_directory() && fs::exists(it->path() / "meta") &&
          fs::exists(it->path() / "loss.csv"))
        run_dirs.push_back(it->path().string());
    }
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty())
    throw ConfigError("report: no run records found under the given roots");
  std::printf("report: %zu runs\n", run_dirs.size());

  // optional GT scoring
  std::vector<double> tau_gt;
  std::vector<double> lumped;
  if (score_vs_gt) {
    std::string gt_dir = cfg.has("report", "gt_dir")
                             ? resolve_path(cfg.source(), cfg.get("report", "gt_dir"))
                             : out_root + "/gt";
    CsvTable t = read_csv(gt_dir + "/tau_gt.csv");
    int cv = t.column("vertex_id"), ct = t.column("tau_ms");
    tau_gt.resize(t.rows.size());
    for (const auto& row : t.rows)
      tau_gt[parse_long(row[cv])] = parse_double(row[ct]);
    Workbench wb = load_workbench(cfg);
    if (static_cast<int>(tau_gt.size()) != wb.heart.mesh.vertex_count())
      throw ConfigError("report: GT map does not match the mesh");
    lumped = wb.heart.mesh.lumped_vertex_volumes();
  }

  EcgTrace target;
  bool have_target = cfg.has("target", "ecg");
  if (have_target)
    target = read_ecg_csv(require_path(cfg, "target", "ecg"));

  struct RunRow {
    std::string dir;
    CellKey key;
    LoadedRun run;
    double dist_e = -1, rel = -1, rho = -2, dlat = -1;
  };
  std::vector<RunRow> rows;
  for (const auto& dir : run_dirs) {
    RunRow row;
    row.dir = dir;
    row.run = read_run_record(dir);
    row.key.constraint = row.run.meta.count("constraint")
                             ? row.run.meta.at("constraint")
                             : "?";
    row.key.leads = row.run.meta.count("leads") ? row.run.meta.at("leads") : "?";
    row.key.n_pmj = row.run.meta.count("n_pmj")
                        ? static_cast<int>(parse_long(row.run.meta.at("n_pmj")))
                        : static_cast<int>(row.run.final_pmjs.size());
    if (have_target && row.run.ecg.lead_count() == target.lead_count() &&
        row.run.ecg.grid.same_as(target.grid)) {
      row.dist_e = dist_ecg(row.run.ecg, target);
      row.rel = rel_dist_ecg(row.run.ecg, target);
      row.rho = pearson(row.run.ecg, target);
    }
    if (score_vs_gt && row.run.tau.size() == tau_gt.size())
      row.dlat = dist_lat(row.run.tau, tau_gt, lumped);
    rows.push_back(std::move(row));
  }

  {
    CsvWriter w(report_dir + "/runs.csv");
    w.row({"dir", "constraint", "leads", "n_pmj", "best_loss", "dist_ecg",
           "rel_dist_ecg", "pearson", "dist_lat_gt"});
    for (const auto& r : rows) {
      auto opt = [](double v, double sentinel) {
        return v == sentinel ? std::string() : format_double(v);
      };
      w.row({fs::path(r.dir).lexically_normal().string(), r.key.constraint,
             r.key.leads, std::to_string(r.key.n_pmj),
             r.run.meta.count("best_loss") ? r.run.meta.at("best_loss") : "",
             opt(r.dist_e, -1), opt(r.rel, -1), opt(r.rho, -2),
             opt(r.dlat, -1)});
    }
  }

  // per-cell aggregation
  std::map<CellKey, std::vector<const RunRow*>> cells;
  for (const auto& r : rows) cells[r.key].push_back(&r);
  {
    CsvWriter w(report_dir + "/metrics.csv");
    w.row({"constraint", "leads", "n_pmj", "runs", "dist_ecg", "dist_lat",
           "dist_bspm", "tau_sigma_bar", "pearson"});
    for (const auto& [key, cell] : cells) {
      double de = 0, dl = 0, rho = 0;
      int nde = 0, ndl = 0, nrho = 0;
      std::vector<const std::vector<double>*> taus;
      for (const auto* r : cell) {
        if (r->dist_e >= 0) { de += r->dist_e; ++nde; }
        if (r->dlat >= 0) { dl += r->dlat; ++ndl; }
        if (r->rho >= -1) { rho += r->rho; ++nrho; }
        if (!r->run.tau.empty()) taus.push_back(&r->run.tau);
      }
      std::string sig;
      if (taus.size() >= 2 && !lumped.empty() &&
          taus[0]->size() == lumped.size()) {
        EnsembleStats st = ensemble_stats(taus, {}, lumped);
        sig = format_double(st.tau_std_bar);
      }
      w.row({key.constraint, key.leads, std::to_string(key.n_pmj),
             std::to_string(cell.size()),
             nde ? format_double(de / nde) : std::string(),
             ndl ? format_double(dl / ndl) : std::string(),
             std::string(),  // dist_bspm: filled by dedicated studies
             sig, nrho ? format_double(rho / nrho) : std::string()});
    }
  }

  // figures: loss curves + per-cell relative-distance boxes
  {
    std::vector<PlotSeries> series;
    for (const auto& r : rows) {
      PlotSeries s;
      s.label = series.size() < 8 ? fs::path(r.dir).filename().string() : "";
      for (std::size_t i = 0; i < r.run.loss_history.size(); ++i) {
        s.x.push_back(static_cast<double>(i));
        s.y.push_back(std::log10(std::max(r.run.loss_history[i], 1e-30)));
      }
      series.push_back(std::move(s));
    }
    write_line_plot(report_dir + "/loss_curves.svg", "optimization loss",
                    "iteration", "log10 loss (mV^2)", series);
  }
  {
    std::vector<BoxGroup> groups;
    for (const auto& [key, cell] : cells) {
      BoxGroup g;
      g.label = key.constraint + "/" + key.leads + "/N" +
                std::to_string(key.n_pmj);
      for (const auto* r : cell)
        if (r->rel >= 0) g.samples.push_back(r->rel);
      if (!g.samples.empty()) groups.push_back(std::move(g));
    }
    if (!groups.empty())
      write_box_plot(report_dir + "/rel_dist_ecg.svg",
                     "relative ECG distance by cell", "rel dist", groups);
  }
  if (score_vs_gt) {
    std::vector<BoxGroup> groups;
    for (const auto& [key, cell] : cells) {
      BoxGroup g;
      g.label = key.constraint + "/" + key.leads + "/N" +
                std::to_string(key.n_pmj);
      for (const auto* r : cell)
        if (r->dlat >= 0) g.samples.push_back(r->dlat);
      if (!g.samples.empty()) groups.push_back(std::move(g));
    }
    if (!groups.empty())
      write_box_plot(report_dir + "/dist_lat_gt.svg",
                     "activation-map distance to ground truth", "ms", groups);
  }
  std::printf("wrote %s\n", report_dir.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardiac digital-twin pipeline (eikonal + lead fields + "
               "projected ADAM)"};
  app.set_version_flag("--version", std::string(kCodeVersion));
  app.require_subcommand(1);

  CommonArgs args;
  bool score_vs_gt = false;

  auto add_common = [&](CLI::App* sub, bool jobs = false) {
    sub->add_option("--config", args.config_path, "config file")->required();
    sub->add_option("--seed", args.seed, "seed override");
    sub->add_option("--out", args.out, "output directory override");
    if (jobs) sub->add_option("--jobs", args.jobs, "worker threads");
  };

  CLI::App* genmesh = app.add_subcommand("genmesh", "build synthetic anatomy");
  add_common(genmesh);
  CLI::App* leads = app.add_subcommand("leads", "precompute lead fields");
  add_common(leads);
  CLI::App* gt = app.add_subcommand("gt", "fabricate ground truth");
  add_common(gt);
  CLI::App* fit = app.add_subcommand("fit", "single optimization run");
  add_common(fit);
  CLI::App* ensemble = app.add_subcommand("ensemble", "multi-start ensemble");
  add_common(ensemble, true);
  CLI::App* sweep = app.add_subcommand("sweep", "PMJ-count sweep");
  add_common(sweep, true);
  CLI::App* report = app.add_subcommand("report", "aggregate run records");
  add_common(report);
  report->add_flag("--score-vs-gt", score_vs_gt,
                   "score runs against the stored ground truth");

  try {
    app.parse(argc, argv);
    if (genmesh->parsed()) cmd_genmesh(args);
    else if (leads->parsed()) cmd_leads(args);
    else if (gt->parsed()) cmd_gt(args);
    else if (fit->parsed()) cmd_fit(args);
    else if (ensemble->parsed()) cmd_ensemble(args);
    else if (sweep->parsed()) cmd_sweep(args);
    else if (report->parsed()) cmd_report(args, score_vs_gt);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "input/output error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
