// On-disk layout of one optimization run and of BSPM snapshot series.
//
//   <run dir>/
//     loss.csv        iteration,loss,skipped
//     pmj_final.csv   id,x_mm,y_mm,z_mm,t_ms,active
//     tau_final.csv   vertex_id,tau_ms
//     ecg_final.csv   time_ms,<leads...>
//     roi.csv         pmj_id,roi_mm3
//     roi_report.csv  pmj_id,x,y,z,t_ms,roi_mm3,active
//     meta            sorted key=value lines
//     timing.txt      wall-clock per iteration (informational)
//
// Every CSV is a pure function of (inputs, config, seed); wall-clock
// measurements are quarantined in timing.txt and meta so reruns produce
// bit-identical CSV files.  BSPM series directory: index.csv
// (sample,time_ms,file) plus one snap_NNNN.csv (vertex_id,phi_mV) per
// sample.  All numbers go through the shortest round-trip formatter.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/csv.hpp"
#include "etwin/ecg.hpp"
#include "etwin/mesh_io.hpp"
#include "etwin/metrics.hpp"
#include "etwin/optimizer.hpp"

namespace etwin {

inline void write_meta(const std::string& path,
                       const std::map<std::string, std::string>& kv) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  for (const auto& [k, v] : kv) f << k << "=" << v << "\n";
  if (!f) throw IoError("write failed: " + path);
}

inline std::map<std::string, std::string> read_meta(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError(path + ": malformed meta line");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

// Full activation-map export: per-vertex arrival time and the index of the
// PMJ whose front arrived first (-1 where no front arrived).
inline void write_activation_csv(const std::string& path,
                                 const ActivationMap& act) {
  CsvWriter w(path);
  w.row({"vertex_id", "tau_ms", "activator"});
  for (std::size_t v = 0; v < act.tau.size(); ++v)
    w.row({std::to_string(v), format_double(act.tau[v]),
           std::to_string(act.activator[v])});
}

inline ActivationMap read_activation_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int cv = t.column("vertex_id"), ct = t.column("tau_ms"),
      ca = t.column("activator");
  ActivationMap act;
  act.tau.resize(t.rows.size());
  act.activator.resize(t.rows.size());
  for (const auto& row : t.rows) {
    long v = parse_long(row[cv]);
    if (v < 0 || v >= static_cast<long>(t.rows.size()))
      throw IoError(path + ": vertex_id out of range");
    act.tau[v] = parse_double(row[ct]);
    act.activator[v] = static_cast<int>(parse_long(row[ca]));
  }
  return act;
}

// Same data as VTK point fields for visual inspection.
inline void write_activation_vtk(const std::string& path, const TetMesh& mesh,
                                 const ActivationMap& act) {
  std::vector<double> activator(act.activator.begin(), act.activator.end());
  write_vtk(path, mesh, {{"activator", activator}, {"tau_ms", act.tau}}, {});
}

// Region-of-influence report: each source with its coordinates, timing, the
// tissue volume it activates first, and whether any front survived from it.
inline void write_roi_report(const std::string& path, const PMJSet& pmjs,
                             const std::vector<std::uint8_t>& active,
                             const std::vector<double>& roi) {
  CsvWriter w(path);
  w.row({"pmj_id", "x", "y", "z", "t_ms", "roi_mm3", "active"});
  for (int j = 0; j < pmjs.size(); ++j) {
    double r = j < static_cast<int>(roi.size()) ? roi[j] : 0.0;
    bool a = j < static_cast<int>(active.size()) && active[j];
    w.row({std::to_string(j), format_double(pmjs[j].pos.x),
           format_double(pmjs[j].pos.y), format_double(pmjs[j].pos.z),
           format_double(pmjs[j].t), format_double(r), a ? "1" : "0"});
  }
}

inline void write_run_record(const std::string& dir, const RunRecord& rec,
                             std::map<std::string, std::string> extra_meta = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    CsvWriter w(dir + "/loss.csv");
    w.row({"iteration", "loss", "skipped"});
    for (std::size_t i = 0; i < rec.loss_history.size(); ++i) {
      bool skipped = i < rec.iterations.size() && rec.iterations[i].skipped;
      w.row({std::to_string(i), format_double(rec.loss_history[i]),
             skipped ? "1" : "0"});
    }
  }
  {
    std::ofstream t(dir + "/timing.txt");
    t << "# wall-clock per iteration (ms); not covered by determinism\n";
    t << "total_s " << format_double(rec.wall_s) << "\n";
    for (std::size_t i = 0; i < rec.iterations.size(); ++i)
      t << i << ' ' << format_double(rec.iterations[i].wall_ms) << "\n";
  }
  {
    CsvWriter w(dir + "/pmj_final.csv");
    w.row({"id", "x_mm", "y_mm", "z_mm", "t_ms", "active"});
    for (int j = 0; j < rec.final_pmjs.size(); ++j) {
      const PMJ& p = rec.final_pmjs[j];
      bool active = j < static_cast<int>(rec.final_act.pmj_active.size()) &&
                    rec.final_act.pmj_active[j];
      w.row({std::to_string(j), format_double(p.pos.x), format_double(p.pos.y),
             format_double(p.pos.z), format_double(p.t), active ? "1" : "0"});
    }
  }
  {
    CsvWriter w(dir + "/tau_final.csv");
    w.row({"vertex_id", "tau_ms"});
    for (std::size_t v = 0; v < rec.final_act.tau.size(); ++v)
      w.row({std::to_string(v), format_double(rec.final_act.tau[v])});
  }
  if (rec.final_ecg.lead_count() > 0)
    write_ecg_csv(dir + "/ecg_final.csv", rec.final_ecg);
  {
    CsvWriter w(dir + "/roi.csv");
    w.row({"pmj_id", "roi_mm3"});
    for (std::size_t j = 0; j < rec.roi.size(); ++j)
      w.row({std::to_string(j), format_double(rec.roi[j])});
  }
  write_roi_report(dir + "/roi_report.csv", rec.final_pmjs,
                   rec.final_act.pmj_active, rec.roi);

  std::map<std::string, std::string> meta;
  meta["code_version"] = kCodeVersion;
  meta["seed"] = std::to_string(rec.seed);
  meta["loss_entries"] = std::to_string(rec.loss_history.size());
  meta["best_iteration"] = std::to_string(rec.best_iteration);
  meta["best_loss"] = format_double(rec.best_loss);
  meta["skipped_iterations"] = std::to_string(rec.skipped_iterations);
  meta["early_stopped"] = rec.early_stopped ? "1" : "0";
  meta["early_stop_iteration"] = std::to_string(rec.early_stop_iteration);
  meta["aborted"] = rec.aborted ? "1" : "0";
  if (!rec.abort_reason.empty()) meta["abort_reason"] = rec.abort_reason;
  meta["wall_s"] = format_double(rec.wall_s);
  for (auto& [k, v] : extra_meta) meta[k] = v;
  write_meta(dir + "/meta", meta);
}

struct LoadedRun {
  std::vector<double> loss_history;
  std::vector<IterationLog> iterations;
  PMJSet final_pmjs;
  std::vector<std::uint8_t> pmj_active;
  std::vector<double> tau;
  EcgTrace ecg;
  std::vector<double> roi;
  std::map<std::string, std::string> meta;
};

inline LoadedRun read_run_record(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedRun run;
  {
    CsvTable t = read_csv(dir + "/loss.csv");
    int cl = t.column("loss"), cs = t.column("skipped");
    for (const auto& row : t.rows) {
      run.loss_history.push_back(parse_double(row[cl]));
      IterationLog log;
      log.loss = run.loss_history.back();
      log.skipped = row[cs] == "1";
      run.iterations.push_back(log);
    }
    if (!run.iterations.empty()) run.iterations.pop_back();  // final row is no step
  }
  {
    CsvTable t = read_csv(dir + "/pmj_final.csv");
    int cx = t.column("x_mm"), cy = t.column("y_mm"), cz = t.column("z_mm");
    int ct = t.column("t_ms"), ca = t.column("active");
    for (const auto& row : t.rows) {
      PMJ p;
      p.pos = {parse_double(row[cx]), parse_double(row[cy]),
               parse_double(row[cz])};
      p.t = parse_double(row[ct]);
      run.final_pmjs.pmjs.push_back(p);
      run.pmj_active.push_back(row[ca] == "1" ? 1 : 0);
    }
  }
  {
    CsvTable t = read_csv(dir + "/tau_final.csv");
    int cv = t.column("vertex_id"), ct = t.column("tau_ms");
    run.tau.resize(t.rows.size());
    for (const auto& row : t.rows)
      run.tau[parse_long(row[cv])] = parse_double(row[ct]);
  }
  if (fs::exists(dir + "/ecg_final.csv"))
    run.ecg = read_ecg_csv(dir + "/ecg_final.csv");
  {
    CsvTable t = read_csv(dir + "/roi.csv");
    int cj = t.column("pmj_id"), cr = t.column("roi_mm3");
    run.roi.resize(t.rows.size());
    for (const auto& row : t.rows)
      run.roi[parse_long(row[cj])] = parse_double(row[cr]);
  }
  run.meta = read_meta(dir + "/meta");
  return run;
}

// ---- BSPM snapshots -----------------------------------------------------------

inline void write_bspm_series(const std::string& dir, const BspmSeries& s) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  CsvWriter index(dir + "/index.csv");
  index.row({"sample", "time_ms", "file"});
  char name[32];
  for (int k = 0; k < s.grid.count(); ++k) {
    std::snprintf(name, sizeof(name), "snap_%04d.csv", k);
    index.row({std::to_string(k), format_double(s.grid.time(k)), name});
    CsvWriter w(dir + "/" + name);
    w.row({"vertex_id", "phi_mV"});
    for (std::size_t i = 0; i < s.vertices.size(); ++i)
      w.row({std::to_string(s.vertices[i]), format_double(s.phi[k][i])});
  }
}

inline BspmSeries read_bspm_series(const std::string& dir) {
  BspmSeries s;
  CsvTable index = read_csv(dir + "/index.csv");
  int ct = index.column("time_ms"), cf = index.column("file");
  if (index.rows.size() < 2) throw IoError(dir + ": BSPM series too short");
  std::vector<double> times;
  for (const auto& row : index.rows) {
    times.push_back(parse_double(row[ct]));
    CsvTable snap = read_csv(dir + "/" + row[cf]);
    int cv = snap.column("vertex_id"), cp = snap.column("phi_mV");
    if (s.vertices.empty()) {
      for (const auto& r : snap.rows)
        s.vertices.push_back(static_cast<int>(parse_long(r[cv])));
    }
    std::vector<double> phi;
    phi.reserve(snap.rows.size());
    for (const auto& r : snap.rows) phi.push_back(parse_double(r[cp]));
    if (phi.size() != s.vertices.size())
      throw IoError(dir + ": inconsistent BSPM snapshot sizes");
    s.phi.push_back(std::move(phi));
  }
  s.grid.t0 = times[0];
  s.grid.dt = times[1] - times[0];
  s.grid.n_t = static_cast<int>(times.size()) - 1;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::abs(times[k] - s.grid.time(static_cast<int>(k))) >
        1e-9 * (1 + std::abs(times[k])))
      throw IoError(dir + ": non-uniform BSPM time grid");
  return s;
}

}  // namespace etwin
