// Reverse-mode differentiation of the eikonal solution with respect to PMJ
// timings and positions.
//
// At the converged fixed point each vertex value is either a seed link
//   tau(v) = t_j + sqrt(d' M^{-1} d),        d = x_v - x_j
// or a face interpolation with frozen barycentric weights
//   tau(v) = sum_k lambda_k tau(u_k) + delta(lambda).
// The minimizing weights are stationary, so perturbations propagate through
// the weights alone (envelope argument): dtau(v) = sum_k lambda_k dtau(u_k).
//
// Backprop walks vertices in descending tau order, pushing each vertex's
// accumulated sensitivity onto its upstream vertices.  On meshes where an
// element is obtuse under the metric, a face can reference an upstream
// vertex with a *later* time; extra Gauss-Seidel passes repair those rare
// back-edges (pass 2 is a cheap no-op verification in the common acyclic
// case).
#pragma once

#include <cmath>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/eikonal.hpp"
#include "etwin/mesh.hpp"

namespace etwin {

struct PmjGradients {
  std::vector<double> wrt_timing;           // dL/dt_j
  std::vector<Vec3> wrt_position;           // dL/dx_j
  std::vector<std::uint8_t> one_sided;      // seed sat on a tet boundary:
                                            // position derivative is one-sided
  int passes = 0;        // Gauss-Seidel passes actually used
  double residual = 0;   // last pass's largest sensitivity update
};

// Pull a loss gradient w.r.t. vertex activation times ("cotangent") back to
// the PMJs that produced the activation map.
inline PmjGradients backprop_pmj(const EikonalSolver& solver,
                                 const PMJSet& pmjs, const AdjointTape& tape,
                                 const std::vector<double>& cotangent,
                                 int max_passes = 64) {
  const TetMesh& mesh = solver.mesh();
  const int nv = mesh.vertex_count();
  if (static_cast<int>(cotangent.size()) != nv)
    throw ConfigError("cotangent size does not match vertex count");
  if (static_cast<int>(tape.entries.size()) != nv)
    throw ConfigError("tape does not match mesh");
  if (tape.problem_hash != solver.problem_hash(pmjs))
    throw ConfigError("stale tape: mesh, velocity, or PMJ set changed since "
                      "the forward solve");

  // Reverse adjacency: for each vertex, the (dependent, weight) pairs that
  // read its value.
  std::vector<int> deg(nv + 1, 0);
  for (int v = 0; v < nv; ++v) {
    const TapeEntry& e = tape.entries[v];
    if (e.kind == TapeEntry::kFace)
      for (int k = 0; k < 3; ++k)
        if (e.l[k] != 0) deg[e.up[k] + 1]++;
  }
  for (int v = 0; v < nv; ++v) deg[v + 1] += deg[v];
  std::vector<int> radj_v(deg[nv]);
  std::vector<double> radj_w(deg[nv]);
  {
    std::vector<int> cursor(deg.begin(), deg.end() - 1);
    for (int v = 0; v < nv; ++v) {
      const TapeEntry& e = tape.entries[v];
      if (e.kind == TapeEntry::kFace)
        for (int k = 0; k < 3; ++k)
          if (e.l[k] != 0) {
            radj_v[cursor[e.up[k]]] = v;
            radj_w[cursor[e.up[k]]] = e.l[k];
            cursor[e.up[k]]++;
          }
    }
  }

  // bar[u] = cot[u] + sum_{v reads u} lambda_{v,u} bar[v]; descending-tau
  // Gauss-Seidel resolves this in one pass when provenance is acyclic.
  std::vector<double> bar(cotangent);
  double scale = 1;
  for (double c : cotangent) scale = std::max(scale, std::abs(c));
  PmjGradients out;
  for (int pass = 0; pass < max_passes; ++pass) {
    double delta = 0;
    for (int u : tape.order) {
      double b = cotangent[u];
      for (int i = deg[u]; i < deg[u + 1]; ++i) b += radj_w[i] * bar[radj_v[i]];
      delta = std::max(delta, std::abs(b - bar[u]));
      bar[u] = b;
    }
    out.passes = pass + 1;
    out.residual = delta;
    if (delta <= 1e-14 * scale) break;
  }

  // Seed links: tau(v) = t_j + sqrt(d' M^{-1} d)
  out.wrt_timing.assign(pmjs.size(), 0.0);
  out.wrt_position.assign(pmjs.size(), Vec3{0, 0, 0});
  out.one_sided.assign(pmjs.size(), 0);
  for (std::size_t j = 0; j < tape.pmj_on_boundary.size() &&
                          j < out.one_sided.size(); ++j)
    out.one_sided[j] = tape.pmj_on_boundary[j];
  for (int v = 0; v < nv; ++v) {
    const TapeEntry& e = tape.entries[v];
    if (e.kind != TapeEntry::kSeed) continue;
    int j = e.up[0];
    out.wrt_timing[j] += bar[v];
    const SymMat3& minv = solver.tet_metric_inv(e.tet);
    Vec3 d = mesh.vertices[v] - pmjs[j].pos;
    double delta = std::sqrt(std::max(0.0, minv.quad(d)));
    if (delta > 1e-12) {
      Vec3 g = minv.apply(d) * (-1.0 / delta);
      out.wrt_position[j] += g * bar[v];
    } else {
      out.one_sided[j] = 1;  // PMJ coincides with the vertex: kink
    }
  }
  return out;
}

// Volume each PMJ activates first: sum of lumped vertex volumes over the
// vertices carrying its activator label.  Unlabeled vertices (unreachable
// regions) contribute to no PMJ.
inline std::vector<double> region_of_influence(const TetMesh& mesh,
                                               const ActivationMap& act,
                                               int pmj_count) {
  std::vector<double> roi(pmj_count, 0.0);
  std::vector<double> lumped = mesh.lumped_vertex_volumes();
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    int j = act.activator[v];
    if (j >= 0 && j < pmj_count) roi[j] += lumped[v];
  }
  return roi;
}

}  // namespace etwin
