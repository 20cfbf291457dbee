// Outer optimization loop: projected ADAM on PMJ positions and timings
// driven by backpropagated ECG-mismatch gradients, plus the multi-start
// ensemble driver and the PMJ-count sweep.
//
// Each iteration runs the forward eikonal solve, assembles the ECG, pulls
// the loss gradient back to the PMJs through the adjoint tape, takes one
// ADAM step, and projects the iterate onto the feasible set.  ADAM moments
// decay every iteration for every parameter, but the step is applied only
// to PMJs that are active in the current solve; inactive PMJs have zero
// gradient (their seeds were overwritten) and are carried along unmodified
// until a receding front reactivates them.  The returned record holds the
// best-loss iterate encountered, re-simulated so its artifacts are mutually
// consistent.
#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "etwin/adjoint.hpp"
#include "etwin/core.hpp"
#include "etwin/ecg.hpp"
#include "etwin/eikonal.hpp"
#include "etwin/feasible.hpp"
#include "etwin/metrics.hpp"
#include "etwin/rng.hpp"

namespace etwin {

struct OptimizerConfig {
  int iterations = 400;
  double lr = 0.75;
  double lr_position = -1;  // < 0: use lr
  double lr_timing = -1;    // < 0: use lr
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_adam = 1e-8;
  int n_pmj = 300;
  std::uint64_t seed = 1;
  SolveOptions solve;
  WaveformParams waveform;
  bool early_stop = false;       // stop once rel. ECG distance < threshold
  double early_stop_rel = 0.05;
  int adjoint_passes = 64;

  void validate() const {
    if (iterations < 1) throw ConfigError("optimizer: iterations must be >= 1");
    if (!(lr > 0)) throw ConfigError("optimizer: learning rate must be positive");
    if (n_pmj < 1) throw ConfigError("optimizer: n_pmj must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
      throw ConfigError("optimizer: betas must lie in [0, 1)");
    waveform.validate();
  }
  double pos_rate() const { return lr_position > 0 ? lr_position : lr; }
  double time_rate() const { return lr_timing > 0 ? lr_timing : lr; }
};

struct IterationLog {
  double loss = 0;
  double wall_ms = 0;
  bool skipped = false;  // non-finite gradient: no step taken
};

struct RunRecord {
  std::uint64_t seed = 0;
  std::vector<double> loss_history;    // loss before each step + final
  std::vector<IterationLog> iterations;
  PMJSet initial_pmjs;
  PMJSet final_pmjs;                   // best-loss iterate
  ActivationMap final_act;
  EcgTrace final_ecg;
  std::vector<double> roi;             // per PMJ (mm^3), best iterate
  double best_loss = kInf;
  int best_iteration = -1;
  int skipped_iterations = 0;
  bool early_stopped = false;
  int early_stop_iteration = -1;
  bool aborted = false;
  std::string abort_reason;
  double wall_s = 0;
};

using IterationObserver =
    std::function<void(int iteration, double loss, const PMJSet&)>;

namespace detail {

inline double trace_norm_to_zero(const EcgTrace& t) {
  // dist to the zero trace under the loss's own normalization
  double acc = 0;
  for (const auto& lead : t.lead)
    for (double v : lead) acc += v * v;
  return std::sqrt(acc / (t.lead_count() * t.grid.span()));
}

}  // namespace detail

inline RunRecord optimize(const EikonalSolver& solver,
                          const FeasibleRegion& region,
                          const LeadMatrix& leads, const EcgTrace& target,
                          const OptimizerConfig& cfg,
                          const PMJSet* initial = nullptr,
                          const IterationObserver& observer = nullptr) {
  cfg.validate();
  if (leads.vertex_count != solver.mesh().vertex_count())
    throw ConfigError("optimize: lead vectors do not match the heart mesh");

  auto t_begin = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.seed = cfg.seed;

  // initial iterate: sampled on the region, timings uniform over the target
  // window, then projected (clamps timings; sampled positions are members)
  PMJSet x;
  if (initial) {
    x = region.project(*initial);
  } else {
    Rng rng(cfg.seed);
    x = region.sample_initial(cfg.n_pmj, target.grid.t0, target.grid.t_end(),
                              rng);
    x = region.project(x);
  }
  rec.initial_pmjs = x;

  const int n = x.size();
  std::vector<double> m(4 * n, 0.0), v(4 * n, 0.0);
  const double target_norm = detail::trace_norm_to_zero(target);

  PMJSet best_x = x;
  int adam_step = 0;

  auto record_abort = [&](const std::string& why) {
    rec.aborted = true;
    rec.abort_reason = why;
  };

  for (int it = 0; it <= cfg.iterations; ++it) {
    auto t0 = std::chrono::steady_clock::now();
    ActivationMap act;
    AdjointTape tape;
    EcgTrace sim;
    double loss;
    try {
      act = solver.solve(x, cfg.solve, &tape);
      sim = ecg_from_activation(leads, act.tau, target.grid, cfg.waveform);
      loss = ecg_loss(sim, target);
    } catch (const std::exception& e) {
      record_abort(e.what());
      break;
    }
    rec.loss_history.push_back(loss);
    if (loss < rec.best_loss) {
      rec.best_loss = loss;
      rec.best_iteration = it;
      best_x = x;
    }
    if (observer) observer(it, loss, x);

    if (it == cfg.iterations) break;

    if (cfg.early_stop && target_norm > 0) {
      double rel = std::sqrt(std::max(loss, 0.0)) / target_norm;
      if (rel < cfg.early_stop_rel) {
        rec.early_stopped = true;
        rec.early_stop_iteration = it;
        break;
      }
    }

    IterationLog log;
    log.loss = loss;

    // gradient: loss -> tau cotangent -> PMJ timings/positions
    std::vector<double> cot = ecg_loss_grad_tau(leads, act.tau, sim, target,
                                                cfg.waveform);
    PmjGradients g =
        backprop_pmj(solver, x, tape, cot, cfg.adjoint_passes);

    bool finite = true;
    for (int j = 0; j < n && finite; ++j)
      finite = std::isfinite(g.wrt_timing[j]) && g.wrt_position[j].finite();

    if (!finite) {
      log.skipped = true;
      ++rec.skipped_iterations;
    } else {
      ++adam_step;
      const double bc1 = 1.0 - std::pow(cfg.beta1, adam_step);
      const double bc2 = 1.0 - std::pow(cfg.beta2, adam_step);
      for (int j = 0; j < n; ++j) {
        double gj[4] = {g.wrt_position[j].x, g.wrt_position[j].y,
                        g.wrt_position[j].z, g.wrt_timing[j]};
        double step[4];
        for (int c = 0; c < 4; ++c) {
          int idx = 4 * j + c;
          m[idx] = cfg.beta1 * m[idx] + (1 - cfg.beta1) * gj[c];
          v[idx] = cfg.beta2 * v[idx] + (1 - cfg.beta2) * gj[c] * gj[c];
          double mh = m[idx] / bc1;
          double vh = v[idx] / bc2;
          step[c] = mh / (std::sqrt(vh) + cfg.eps_adam);
        }
        if (act.pmj_active[j]) {
          x[j].pos.x -= cfg.pos_rate() * step[0];
          x[j].pos.y -= cfg.pos_rate() * step[1];
          x[j].pos.z -= cfg.pos_rate() * step[2];
          x[j].t -= cfg.time_rate() * step[3];
        }
      }
      x = region.project(x);
    }

    log.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    rec.iterations.push_back(log);
  }

  // re-simulate the best iterate so the recorded artifacts are consistent
  if (rec.best_iteration >= 0) {
    rec.final_pmjs = best_x;
    try {
      AdjointTape tape;
      rec.final_act = solver.solve(best_x, cfg.solve, &tape);
      rec.final_ecg = ecg_from_activation(leads, rec.final_act.tau,
                                          target.grid, cfg.waveform);
      rec.roi = region_of_influence(solver.mesh(), rec.final_act,
                                    best_x.size());
    } catch (const std::exception& e) {
      if (!rec.aborted) record_abort(e.what());
    }
  }
  rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t_begin)
                   .count();
  return rec;
}

// ---- multi-start ensembles ---------------------------------------------------

// Seed for run i of an ensemble: an independent splitmix stream step so runs
// are decorrelated but reproducible from (base_seed, i) alone.
inline std::uint64_t ensemble_run_seed(std::uint64_t base_seed, int run) {
  return Rng::splitmix(base_seed + 0x9e3779b97f4a7c15ull *
                                       static_cast<std::uint64_t>(run + 1));
}

using RunObserver = std::function<void(int run, const RunRecord&)>;

// Independent multi-start runs.  Results are a pure function of
// (base seed, run index); the jobs count only changes scheduling.  A run
// that throws is recorded as aborted; the others proceed.
inline std::vector<RunRecord> run_ensemble(
    const EikonalSolver& solver, const FeasibleRegion& region,
    const LeadMatrix& leads, const EcgTrace& target,
    const OptimizerConfig& cfg, int count, std::uint64_t base_seed,
    int jobs = 1, const RunObserver& observer = nullptr) {
  if (count < 1) throw ConfigError("ensemble: count must be >= 1");
  std::vector<RunRecord> out(count);
  std::atomic<int> cursor{0};
  std::mutex obs_mutex;

  auto worker = [&]() {
    for (;;) {
      int i = cursor.fetch_add(1);
      if (i >= count) return;
      OptimizerConfig run_cfg = cfg;
      run_cfg.seed = ensemble_run_seed(base_seed, i);
      RunRecord rec;
      try {
        rec = optimize(solver, region, leads, target, run_cfg);
      } catch (const std::exception& e) {
        rec.seed = run_cfg.seed;
        rec.aborted = true;
        rec.abort_reason = e.what();
      }
      out[i] = std::move(rec);
      if (observer) {
        std::lock_guard<std::mutex> lock(obs_mutex);
        observer(i, out[i]);
      }
    }
  };

  int workers = std::max(1, std::min(jobs, count));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

// ---- PMJ-count sweep -----------------------------------------------------------

struct SweepCell {
  int n_pmj = 0;
  std::vector<RunRecord> runs;
  double median_dist_ecg = kInf;      // loss-derived RMS distance (mV)
  double median_rel_dist_ecg = kInf;  // vs. the target's own norm
  double mean_active_fraction = 0;
  double mean_roi95_share = 0;  // fraction of PMJs covering 95% of volume
};

inline double median_of(std::vector<double> xs) {
  if (xs.empty()) return kInf;
  std::sort(xs.begin(), xs.end());
  std::size_t n = xs.size();
  return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// Share of PMJs (largest first) needed to cover `coverage` of the summed ROI.
inline double roi_concentration_share(const std::vector<double>& roi,
                                      double coverage = 0.95) {
  if (roi.empty()) return 0;
  std::vector<double> s(roi);
  std::sort(s.begin(), s.end(), std::greater<double>());
  double total = 0;
  for (double v : s) total += v;
  if (!(total > 0)) return 0;
  double acc = 0;
  std::size_t k = 0;
  for (; k < s.size(); ++k) {
    acc += s[k];
    if (acc >= coverage * total) {
      ++k;
      break;
    }
  }
  return static_cast<double>(k) / static_cast<double>(s.size());
}

inline std::vector<SweepCell> sweep_pmj_count(
    const EikonalSolver& solver, const FeasibleRegion& region,
    const LeadMatrix& leads, const EcgTrace& target,
    const OptimizerConfig& cfg, const std::vector<int>& n_values,
    int runs_per_n, std::uint64_t base_seed, int jobs = 1,
    const RunObserver& observer = nullptr) {
  std::vector<SweepCell> cells;
  for (std::size_t c = 0; c < n_values.size(); ++c) {
    SweepCell cell;
    cell.n_pmj = n_values[c];
    OptimizerConfig n_cfg = cfg;
    n_cfg.n_pmj = n_values[c];
    std::uint64_t cell_seed =
        Rng::splitmix(base_seed ^ (0x517cc1b727220a95ull *
                                   static_cast<std::uint64_t>(c + 1)));
    cell.runs = run_ensemble(solver, region, leads, target, n_cfg, runs_per_n,
                             cell_seed, jobs, observer);

    std::vector<double> dists, rels;
    double active_acc = 0, roi_acc = 0;
    int ok = 0;
    for (const auto& r : cell.runs) {
      if (r.aborted || r.best_iteration < 0) continue;
      dists.push_back(dist_ecg(r.final_ecg, target));
      rels.push_back(rel_dist_ecg(r.final_ecg, target));
      int n_active = 0;
      for (auto a : r.final_act.pmj_active) n_active += a ? 1 : 0;
      active_acc += static_cast<double>(n_active) /
                    static_cast<double>(r.final_pmjs.size());
      roi_acc += roi_concentration_share(r.roi);
      ++ok;
    }
    cell.median_dist_ecg = median_of(dists);
    cell.median_rel_dist_ecg = median_of(rels);
    if (ok > 0) {
      cell.mean_active_fraction = active_acc / ok;
      cell.mean_roi95_share = roi_acc / ok;
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace etwin
