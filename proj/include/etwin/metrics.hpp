// Evaluation metrics: trace/map/surface distances, pooled Pearson
// correlation, and ensemble statistics (pointwise mean/deviation, the
// volume-averaged spread scalar, representative-sample and extreme-pair
// selection).
//
// All spatial quadratures are lumped (vertex volumes or vertex surface
// areas); time integrals use the trapezoid rule on the uniform grid.
// Variances use the population (1/N) convention.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/ecg.hpp"
#include "etwin/mesh.hpp"

namespace etwin {

// Trapezoid weight of sample k on a uniform grid.
inline double trapezoid_weight(const TemporalGrid& g, int k) {
  return (k == 0 || k == g.n_t) ? 0.5 * g.dt : g.dt;
}

// RMS distance between traces: sqrt of the lead-mean, time-averaged squared
// difference (trapezoid in time).
inline double dist_ecg(const EcgTrace& a, const EcgTrace& b) {
  if (!a.grid.same_as(b.grid)) throw ConfigError("dist_ecg: grid mismatch");
  if (a.lead_count() != b.lead_count())
    throw ConfigError("dist_ecg: lead count mismatch");
  double acc = 0;
  for (int l = 0; l < a.lead_count(); ++l)
    for (int k = 0; k < a.grid.count(); ++k) {
      double r = a.lead[l][k] - b.lead[l][k];
      acc += trapezoid_weight(a.grid, k) * r * r;
    }
  return std::sqrt(acc / (a.lead_count() * a.grid.span()));
}

inline EcgTrace zero_trace_like(const EcgTrace& a) {
  EcgTrace z;
  z.grid = a.grid;
  z.lead_names = a.lead_names;
  z.lead.assign(a.lead.size(), std::vector<double>(a.grid.count(), 0.0));
  return z;
}

// dist_ecg normalized by the target's own distance to the zero trace.
inline double rel_dist_ecg(const EcgTrace& sim, const EcgTrace& target) {
  double denom = dist_ecg(target, zero_trace_like(target));
  if (!(denom > 0)) throw NumericError("rel_dist_ecg: zero target trace");
  return dist_ecg(sim, target) / denom;
}

// Pooled product-moment correlation over all leads' samples.
inline double pearson(const EcgTrace& a, const EcgTrace& b) {
  if (!a.grid.same_as(b.grid)) throw ConfigError("pearson: grid mismatch");
  if (a.lead_count() != b.lead_count())
    throw ConfigError("pearson: lead count mismatch");
  double ma = 0, mb = 0;
  long n = 0;
  for (int l = 0; l < a.lead_count(); ++l)
    for (int k = 0; k < a.grid.count(); ++k) {
      ma += a.lead[l][k];
      mb += b.lead[l][k];
      ++n;
    }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (int l = 0; l < a.lead_count(); ++l)
    for (int k = 0; k < a.grid.count(); ++k) {
      double da = a.lead[l][k] - ma, db = b.lead[l][k] - mb;
      sab += da * db;
      saa += da * da;
      sbb += db * db;
    }
  if (!(saa > 0) || !(sbb > 0))
    throw NumericError("pearson: zero-variance input");
  return sab / std::sqrt(saa * sbb);
}

// Volume-weighted RMSD between two activation maps on the same mesh.
inline double dist_lat(const std::vector<double>& tau_a,
                       const std::vector<double>& tau_b,
                       const std::vector<double>& lumped_volumes) {
  if (tau_a.size() != tau_b.size() || tau_a.size() != lumped_volumes.size())
    throw ConfigError("dist_lat: size mismatch");
  double acc = 0, vol = 0;
  for (std::size_t v = 0; v < tau_a.size(); ++v) {
    double d = tau_a[v] - tau_b[v];
    acc += lumped_volumes[v] * d * d;
    vol += lumped_volumes[v];
  }
  if (!(vol > 0)) throw ConfigError("dist_lat: zero volume");
  return std::sqrt(acc / vol);
}

inline double dist_lat(const std::vector<double>& tau_a,
                       const std::vector<double>& tau_b, const TetMesh& mesh) {
  return dist_lat(tau_a, tau_b, mesh.lumped_vertex_volumes());
}

// Body-surface potential series sampled on a fixed vertex subset.
struct BspmSeries {
  TemporalGrid grid;
  std::vector<int> vertices;               // full-mesh vertex ids
  std::vector<std::vector<double>> phi;    // [sample][vertex index]
};

// Space-time RMSD between two surface potential series; surface quadrature
// by per-vertex lumped areas, time by trapezoid.
inline double dist_bspm(const BspmSeries& a, const BspmSeries& b,
                        const std::vector<double>& vertex_areas) {
  if (!a.grid.same_as(b.grid)) throw ConfigError("dist_bspm: grid mismatch");
  if (a.vertices != b.vertices) throw ConfigError("dist_bspm: vertex mismatch");
  if (a.phi.size() != static_cast<std::size_t>(a.grid.count()))
    throw ConfigError("dist_bspm: sample count mismatch");
  double area = 0;
  std::vector<double> w(a.vertices.size());
  for (std::size_t i = 0; i < a.vertices.size(); ++i) {
    w[i] = vertex_areas[a.vertices[i]];
    area += w[i];
  }
  if (!(area > 0)) throw ConfigError("dist_bspm: zero surface area");
  double acc = 0;
  for (int k = 0; k < a.grid.count(); ++k) {
    double wk = trapezoid_weight(a.grid, k);
    const auto& pa = a.phi[k];
    const auto& pb = b.phi[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      double d = pa[i] - pb[i];
      acc += wk * w[i] * d * d;
    }
  }
  return std::sqrt(acc / (area * a.grid.span()));
}

// ---- ensemble statistics --------------------------------------------------------

struct PairPick {
  int i = -1, j = -1;
  double value = 0;
};

struct EnsembleStats {
  std::vector<double> tau_mean;   // per vertex
  std::vector<double> tau_std;    // per vertex, population convention
  double tau_std_bar = 0;         // volume-weighted mean of tau_std (ms)
  std::vector<std::vector<double>> ecg_mean;  // [lead][sample]
  std::vector<std::vector<double>> ecg_std;
  int representative = -1;        // sample minimizing dist_lat to tau_mean
  PairPick max_pair_lat, min_pair_lat;
  PairPick max_pair_ecg, min_pair_ecg;
};

// Pointwise ensemble statistics over activation maps and traces.  Entries
// must share the mesh (tau size) and grid.
inline EnsembleStats ensemble_stats(
    const std::vector<const std::vector<double>*>& taus,
    const std::vector<const EcgTrace*>& traces,
    const std::vector<double>& lumped_volumes) {
  const int n = static_cast<int>(taus.size());
  if (n < 2) throw ConfigError("ensemble_stats: need at least 2 samples");
  if (!traces.empty() && static_cast<int>(traces.size()) != n)
    throw ConfigError("ensemble_stats: trace/map count mismatch");
  const std::size_t nv = taus[0]->size();
  for (const auto* t : taus)
    if (t->size() != nv) throw ConfigError("ensemble_stats: map size mismatch");

  EnsembleStats out;
  out.tau_mean.assign(nv, 0.0);
  out.tau_std.assign(nv, 0.0);
  for (const auto* t : taus)
    for (std::size_t v = 0; v < nv; ++v) out.tau_mean[v] += (*t)[v];
  for (std::size_t v = 0; v < nv; ++v) out.tau_mean[v] /= n;
  for (const auto* t : taus)
    for (std::size_t v = 0; v < nv; ++v) {
      double d = (*t)[v] - out.tau_mean[v];
      out.tau_std[v] += d * d;
    }
  double vol = 0, acc = 0;
  for (std::size_t v = 0; v < nv; ++v) {
    out.tau_std[v] = std::sqrt(out.tau_std[v] / n);
    vol += lumped_volumes[v];
    acc += lumped_volumes[v] * out.tau_std[v];
  }
  out.tau_std_bar = acc / vol;

  // representative: closest to the mean map
  double best = kInf;
  for (int i = 0; i < n; ++i) {
    double d = dist_lat(*taus[i], out.tau_mean, lumped_volumes);
    if (d < best) {
      best = d;
      out.representative = i;
    }
  }

  // extreme pairs
  out.min_pair_lat.value = kInf;
  out.max_pair_lat.value = -kInf;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double d = dist_lat(*taus[i], *taus[j], lumped_volumes);
      if (d > out.max_pair_lat.value) out.max_pair_lat = {i, j, d};
      if (d < out.min_pair_lat.value) out.min_pair_lat = {i, j, d};
    }

  if (!traces.empty()) {
    const EcgTrace& t0 = *traces[0];
    out.ecg_mean.assign(t0.lead_count(),
                        std::vector<double>(t0.grid.count(), 0.0));
    out.ecg_std = out.ecg_mean;
    for (const auto* t : traces) {
      if (!t->grid.same_as(t0.grid) || t->lead_count() != t0.lead_count())
        throw ConfigError("ensemble_stats: trace layout mismatch");
      for (int l = 0; l < t0.lead_count(); ++l)
        for (int k = 0; k < t0.grid.count(); ++k)
          out.ecg_mean[l][k] += t->lead[l][k];
    }
    for (auto& lead : out.ecg_mean)
      for (double& v : lead) v /= n;
    for (const auto* t : traces)
      for (int l = 0; l < t0.lead_count(); ++l)
        for (int k = 0; k < t0.grid.count(); ++k) {
          double d = t->lead[l][k] - out.ecg_mean[l][k];
          out.ecg_std[l][k] += d * d;
        }
    for (auto& lead : out.ecg_std)
      for (double& v : lead) v = std::sqrt(v / n);

    out.min_pair_ecg.value = kInf;
    out.max_pair_ecg.value = -kInf;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        double d = dist_ecg(*traces[i], *traces[j]);
        if (d > out.max_pair_ecg.value) out.max_pair_ecg = {i, j, d};
        if (d < out.min_pair_ecg.value) out.min_pair_ecg = {i, j, d};
      }
  }
  return out;
}

}  // namespace etwin
