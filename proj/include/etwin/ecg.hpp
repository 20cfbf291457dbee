// Surface ECG assembly from activation maps.
//
// The transmembrane potential at a vertex is a closed-form tanh upstroke
// centered at the vertex's activation time; each lead voltage is a
// precomputed per-vertex weight vector dotted with the transmembrane field
// at every sample time.  The mismatch loss against a target trace is the
// squared-difference sum over leads and samples, normalized by lead count
// and window length, and is differentiable in the activation times.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/csv.hpp"
#include "etwin/leads.hpp"

namespace etwin {

struct WaveformParams {
  double v_rest = -85.0;   // mV
  double v_peak = 30.0;    // mV
  double eps = 1.0;        // upstroke width (ms)

  void validate() const {
    if (!(v_peak > v_rest)) throw ConfigError("waveform: v_peak must exceed v_rest");
    if (!(eps > 0)) throw ConfigError("waveform: eps must be positive");
  }
};

struct TemporalGrid {
  double t0 = 0;    // ms
  double dt = 0.5;  // ms
  int n_t = 240;    // sample count is n_t + 1 (inclusive end)

  static TemporalGrid covering(double t0, double t_end_min, double dt) {
    if (!(dt > 0)) throw ConfigError("temporal grid: dt must be positive");
    if (!(t_end_min > t0)) throw ConfigError("temporal grid: empty window");
    TemporalGrid g;
    g.t0 = t0;
    g.dt = dt;
    g.n_t = static_cast<int>(std::ceil((t_end_min - t0) / dt - 1e-12));
    if (g.n_t < 1) g.n_t = 1;
    return g;
  }

  int count() const { return n_t + 1; }
  double time(int k) const { return t0 + k * dt; }
  double t_end() const { return t0 + n_t * dt; }
  double span() const { return n_t * dt; }
  bool same_as(const TemporalGrid& o) const {
    return t0 == o.t0 && dt == o.dt && n_t == o.n_t;
  }
};

// Normalized upstroke in [0, 1] as a function of s = t - tau.
inline double upstroke(double s, double eps) {
  return 0.5 * (std::tanh(2.0 * s / eps) + 1.0);
}

// d/ds upstroke(s)
inline double upstroke_rate(double s, double eps) {
  double c = std::cosh(2.0 * s / eps);
  return 1.0 / (eps * c * c);
}

inline double transmembrane(double t, double tau, const WaveformParams& wf) {
  return wf.v_rest + (wf.v_peak - wf.v_rest) * upstroke(t - tau, wf.eps);
}

struct EcgTrace {
  TemporalGrid grid;
  std::vector<std::string> lead_names;
  std::vector<std::vector<double>> lead;  // [lead][sample], mV

  int lead_count() const { return static_cast<int>(lead.size()); }
};

// V_le(t_k) = B_le . V_m(t_k)
inline EcgTrace ecg_from_activation(const LeadMatrix& leads,
                                    const std::vector<double>& tau,
                                    const TemporalGrid& grid,
                                    const WaveformParams& wf = {}) {
  wf.validate();
  if (static_cast<int>(tau.size()) != leads.vertex_count)
    throw ConfigError("ecg: activation map size does not match lead vectors");
  const int nl = leads.lead_count();
  const int nv = leads.vertex_count;
  const int nk = grid.count();
  const double dv = wf.v_peak - wf.v_rest;

  EcgTrace out;
  out.grid = grid;
  out.lead_names = leads.names;
  out.lead.assign(nl, std::vector<double>(nk, 0.0));
  std::vector<double> u(nv);
  for (int k = 0; k < nk; ++k) {
    double t = grid.time(k);
    for (int v = 0; v < nv; ++v) u[v] = upstroke(t - tau[v], wf.eps);
    for (int l = 0; l < nl; ++l) {
      const double* b = leads.rows[l].data();
      double acc_u = 0, acc_b = 0;
      for (int v = 0; v < nv; ++v) {
        acc_u += b[v] * u[v];
        acc_b += b[v];
      }
      // V_m = v_rest + dv * u; the v_rest part rides on sum(B) (≈ 0)
      out.lead[l][k] = wf.v_rest * acc_b + dv * acc_u;
    }
  }
  return out;
}

// Mean over leads, window-normalized sum over samples, of squared residuals.
inline double ecg_loss(const EcgTrace& sim, const EcgTrace& target) {
  if (!sim.grid.same_as(target.grid)) throw ConfigError("ecg loss: grid mismatch");
  if (sim.lead_count() != target.lead_count())
    throw ConfigError("ecg loss: lead count mismatch");
  const int nl = sim.lead_count();
  const int nk = sim.grid.count();
  double acc = 0;
  for (int l = 0; l < nl; ++l)
    for (int k = 0; k < nk; ++k) {
      double r = sim.lead[l][k] - target.lead[l][k];
      acc += r * r;
    }
  return acc / (nl * sim.grid.span());
}

// dL/dtau per vertex for the loss above, evaluated at the simulated trace.
// The upstroke derivative decays like exp(-4|s|/eps); samples outside
// |t - tau| <= window_eps * eps contribute below double precision and are
// skipped.
inline std::vector<double> ecg_loss_grad_tau(const LeadMatrix& leads,
                                             const std::vector<double>& tau,
                                             const EcgTrace& sim,
                                             const EcgTrace& target,
                                             const WaveformParams& wf = {},
                                             double window_eps = 12.0) {
  if (!sim.grid.same_as(target.grid)) throw ConfigError("ecg grad: grid mismatch");
  const int nl = leads.lead_count();
  const int nv = leads.vertex_count;
  const TemporalGrid& grid = sim.grid;
  const double dv = wf.v_peak - wf.v_rest;
  const double norm = 2.0 / (nl * grid.span());
  const double window = window_eps * wf.eps;

  // residuals per (lead, sample)
  std::vector<std::vector<double>> res(nl);
  for (int l = 0; l < nl; ++l) {
    res[l].resize(grid.count());
    for (int k = 0; k < grid.count(); ++k)
      res[l][k] = sim.lead[l][k] - target.lead[l][k];
  }

  std::vector<double> grad(nv, 0.0);
  for (int v = 0; v < nv; ++v) {
    double tv = tau[v];
    int k0 = std::max(0, static_cast<int>(std::floor((tv - window - grid.t0) / grid.dt)));
    int k1 = std::min(grid.n_t, static_cast<int>(std::ceil((tv + window - grid.t0) / grid.dt)));
    double acc = 0;
    for (int k = k0; k <= k1; ++k) {
      double rate = upstroke_rate(grid.time(k) - tv, wf.eps);
      double rb = 0;
      for (int l = 0; l < nl; ++l) rb += res[l][k] * leads.rows[l][v];
      acc += rate * rb;
    }
    // dV_m/dtau = -dv * upstroke_rate
    grad[v] = -norm * dv * acc;
  }
  return grad;
}

// ---- CSV round-trip ----------------------------------------------------------

inline void write_ecg_csv(const std::string& path, const EcgTrace& trace) {
  CsvWriter w(path);
  std::vector<std::string> row;
  row.push_back("time_ms");
  for (const auto& n : trace.lead_names) row.push_back(n);
  w.row(row);
  for (int k = 0; k < trace.grid.count(); ++k) {
    row.clear();
    row.push_back(format_double(trace.grid.time(k)));
    for (const auto& l : trace.lead) row.push_back(format_double(l[k]));
    w.row(row);
  }
}

inline EcgTrace read_ecg_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  if (t.header.empty() || t.header[0] != "time_ms")
    throw IoError(path + ": expected time_ms as first column");
  if (t.rows.size() < 2) throw IoError(path + ": need at least two samples");
  EcgTrace out;
  for (std::size_t c = 1; c < t.header.size(); ++c)
    out.lead_names.push_back(t.header[c]);
  int nk = static_cast<int>(t.rows.size());
  double t0 = parse_double(t.rows[0][0]);
  double t1 = parse_double(t.rows[1][0]);
  out.grid.t0 = t0;
  out.grid.dt = t1 - t0;
  out.grid.n_t = nk - 1;
  if (!(out.grid.dt > 0)) throw IoError(path + ": non-increasing time column");
  out.lead.assign(out.lead_names.size(), std::vector<double>(nk, 0.0));
  for (int k = 0; k < nk; ++k) {
    const auto& row = t.rows[k];
    if (row.size() != t.header.size())
      throw IoError(path + ": ragged row " + std::to_string(k));
    double tk = parse_double(row[0]);
    if (std::abs(tk - out.grid.time(k)) > 1e-9 * (1 + std::abs(tk)))
      throw IoError(path + ": non-uniform time grid");
    for (std::size_t c = 1; c < row.size(); ++c)
      out.lead[c - 1][k] = parse_double(row[c]);
  }
  return out;
}

}  // namespace etwin
