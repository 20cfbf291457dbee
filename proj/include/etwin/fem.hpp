// P1 finite elements for torso potentials.
//
// Two symmetric operators are assembled on the full conforming mesh:
//   K    bulk conductivity (intra+extra in myocardium, isotropic organs)
//   K_i  intracellular conductivity, supported on myocardial elements only
//
// The extracellular/torso potential solves  K phi = -K_i v_m  (zero-flux
// boundary), and one lead field per electrode solves  K y = -(d_e - d_ref)
// with lumped point loads; both are pure-Neumann singular systems handled by
// conjugate gradients with Jacobi preconditioning and per-iteration removal
// of the constant mode from the residual.  Solutions are shifted afterwards
// so that the area-weighted mean over the torso skin vanishes.
//
// The per-lead projection vectors are b = scale * K_i z restricted to heart
// vertices, with z the weighted combination of electrode basis fields.
// Building leads from a per-electrode basis makes weight linearity
// (e.g. Einthoven Z_I + Z_III = Z_II) hold to rounding rather than to
// solver tolerance.  The load sign is chosen so that b . v_m equals the
// scaled electrode readout of the potential driven by v_m (discrete
// reciprocity with a + sign).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/leads.hpp"
#include "etwin/mesh.hpp"
#include "etwin/synthetic.hpp"

namespace etwin {

struct Conductivities {
  // myocardium (S/m), intra/extra along fiber, sheet, sheet-normal axes
  double gi_f = 0.34, gi_s = 0.06, gi_n = 0.06;
  double ge_f = 0.12, ge_s = 0.08, ge_n = 0.08;
  // isotropic organs (S/m)
  double torso = 0.22;
  double blood = 0.7;
  double lung = 0.0389;

  void validate() const {
    for (double g : {gi_f, gi_s, gi_n, ge_f, ge_s, ge_n, torso, blood, lung})
      if (!(g > 0)) throw ConfigError("conductivities must be positive");
  }
};

struct FemOptions {
  double tol = 1e-10;   // relative residual
  int max_iter = 20000;
};

struct PcgStats {
  int iterations = 0;
  double rel_residual = 0;
};

class TorsoFem {
 public:
  TorsoFem(const TetMesh& mesh, const VelocityField& fibers,
           const Conductivities& cond = {},
           const std::string& skin_surface = "torso_skin",
           int heart_region = kRegionVentricle)
      : mesh_(mesh), cond_(cond) {
    cond.validate();
    if (!mesh.finalized()) throw GeometryError("mesh not finalized");
    check_connected();
    build_sparsity();
    assemble(fibers, heart_region);
    skin_areas_ = mesh.lumped_surface_areas(skin_surface);
    skin_total_ = 0;
    for (int v = 0; v < mesh.vertex_count(); ++v) skin_total_ += skin_areas_[v];
    if (!(skin_total_ > 0)) throw GeometryError("empty skin surface");
  }

  const TetMesh& mesh() const { return mesh_; }

  // ---- linear algebra --------------------------------------------------------

  void apply_bulk(const std::vector<double>& x, std::vector<double>& y) const {
    spmv(k_vals_, x, y);
  }
  void apply_intra(const std::vector<double>& x, std::vector<double>& y) const {
    spmv(ki_vals_, x, y);
  }

  // Symmetry / diagonal access for invariants.
  double bulk_entry(int row, int col) const {
    for (int i = rowptr_[row]; i < rowptr_[row + 1]; ++i)
      if (cols_[i] == col) return k_vals_[i];
    return 0.0;
  }

  // CG on the singular pure-Neumann operator.  rhs must be compatible
  // (orthogonal to constants); the returned potential has zero area-weighted
  // mean over the torso skin.
  std::vector<double> solve_bulk(const std::vector<double>& rhs,
                                 const FemOptions& opt = {},
                                 const std::vector<double>* x0 = nullptr,
                                 PcgStats* stats = nullptr) const {
    std::vector<double> x = pcg(rhs, opt, x0, stats);
    shift_skin_mean(x);
    return x;
  }

  // phi with  K phi = -K_i v_m_full  (v_m given on full-mesh vertices).
  std::vector<double> pseudo_bidomain_full(const std::vector<double>& vm_full,
                                           const FemOptions& opt = {},
                                           const std::vector<double>* x0 = nullptr,
                                           PcgStats* stats = nullptr) const {
    if (static_cast<int>(vm_full.size()) != mesh_.vertex_count())
      throw ConfigError("pseudo-bidomain: v_m size mismatch");
    std::vector<double> rhs(vm_full.size());
    apply_intra(vm_full, rhs);
    for (double& r : rhs) r = -r;
    return solve_bulk(rhs, opt, x0, stats);
  }

  // Same with v_m given on a heart submesh; values are scattered to parent
  // vertices (the intracellular operator only reads those).
  std::vector<double> pseudo_bidomain(const std::vector<double>& vm_heart,
                                      const Submesh& heart,
                                      const FemOptions& opt = {},
                                      const std::vector<double>* x0 = nullptr,
                                      PcgStats* stats = nullptr) const {
    if (vm_heart.size() != heart.vertex_to_parent.size())
      throw ConfigError("pseudo-bidomain: v_m does not match heart submesh");
    std::vector<double> vm_full(mesh_.vertex_count(), 0.0);
    for (std::size_t i = 0; i < vm_heart.size(); ++i)
      vm_full[heart.vertex_to_parent[i]] = vm_heart[i];
    return pseudo_bidomain_full(vm_full, opt, x0, stats);
  }

  double electrode_readout(const LeadLayout& layout, const LeadDef& lead,
                           const std::vector<double>& phi) const {
    double acc = 0;
    for (const auto& [e, w] : lead.terms)
      acc += w * phi[layout.electrodes[e].vertex];
    return acc;
  }

  // ---- lead fields -----------------------------------------------------------

  // One basis field per non-reference electrode: K y = -(d_e - d_ref).
  std::vector<double> electrode_basis_field(int vertex_e, int vertex_ref,
                                            const FemOptions& opt = {},
                                            PcgStats* stats = nullptr) const {
    std::vector<double> rhs(mesh_.vertex_count(), 0.0);
    rhs[vertex_e] -= 1.0;
    rhs[vertex_ref] += 1.0;
    if (vertex_e == vertex_ref) std::fill(rhs.begin(), rhs.end(), 0.0);
    return solve_bulk(rhs, opt, nullptr, stats);
  }

  LeadSet build_leadset(const LeadLayout& layout, const Submesh& heart,
                        double scale = 0.32, const FemOptions& opt = {}) const {
    for (const auto& ld : layout.leads)
      if (std::abs(ld.weight_sum()) > 1e-12)
        throw ConfigError("lead '" + ld.name + "' weights do not sum to zero");
    if (layout.electrodes.empty()) throw ConfigError("layout has no electrodes");

    const int nh = static_cast<int>(heart.vertex_to_parent.size());
    const int ne = static_cast<int>(layout.electrodes.size());
    const int ref = layout.electrodes[0].vertex;

    // Restricted basis: per electrode, its lead field and K_i-image on heart
    // vertices.  The reference electrode's field is identically zero.
    std::vector<std::vector<double>> yh(ne), byh(ne);
    std::vector<double> ki_y(mesh_.vertex_count());
    FemOptions lead_opt = opt;
    lead_opt.tol = std::min(opt.tol, 1e-12);
    for (int e = 0; e < ne; ++e) {
      yh[e].assign(nh, 0.0);
      byh[e].assign(nh, 0.0);
      if (layout.electrodes[e].vertex == ref) continue;
      std::vector<double> y =
          electrode_basis_field(layout.electrodes[e].vertex, ref, lead_opt);
      apply_intra(y, ki_y);
      for (int i = 0; i < nh; ++i) {
        yh[e][i] = y[heart.vertex_to_parent[i]];
        byh[e][i] = ki_y[heart.vertex_to_parent[i]];
      }
    }

    LeadSet ls;
    ls.layout = layout;
    ls.scale = scale;
    ls.b.vertex_count = nh;
    for (const auto& ld : layout.leads) {
      std::vector<double> z(nh, 0.0), b(nh, 0.0);
      for (const auto& [e, w] : ld.terms) {
        for (int i = 0; i < nh; ++i) {
          z[i] += w * yh[e][i];
          b[i] += w * byh[e][i];
        }
      }
      for (int i = 0; i < nh; ++i) b[i] *= scale;
      ls.z.push_back(std::move(z));
      ls.b.names.push_back(ld.name);
      ls.b.rows.push_back(std::move(b));
    }
    return ls;
  }

  // Area-weighted torso-skin mean (diagnostic for the zero-mean constraint).
  double skin_mean(const std::vector<double>& phi) const {
    double acc = 0;
    for (int v = 0; v < mesh_.vertex_count(); ++v)
      acc += skin_areas_[v] * phi[v];
    return acc / skin_total_;
  }

  const std::vector<double>& skin_areas() const { return skin_areas_; }
  double skin_area_total() const { return skin_total_; }

 private:
  void check_connected() const {
    const int nv = mesh_.vertex_count();
    std::vector<std::uint8_t> seen(nv, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      auto [b, e] = mesh_.vertex_neighbors(v);
      for (const int* u = b; u != e; ++u)
        if (!seen[*u]) {
          seen[*u] = 1;
          ++count;
          stack.push_back(*u);
        }
    }
    if (count != nv)
      throw GeometryError("mesh is disconnected: assembly would be singular");
  }

  void build_sparsity() {
    const int nv = mesh_.vertex_count();
    rowptr_.assign(nv + 1, 0);
    // row v: self + tet-sharing neighbors (already sorted in the mesh CSR)
    for (int v = 0; v < nv; ++v) {
      auto [b, e] = mesh_.vertex_neighbors(v);
      rowptr_[v + 1] = rowptr_[v] + static_cast<int>(e - b) + 1;
    }
    cols_.resize(rowptr_[nv]);
    for (int v = 0; v < nv; ++v) {
      auto [b, e] = mesh_.vertex_neighbors(v);
      int* dst = cols_.data() + rowptr_[v];
      bool placed = false;
      for (const int* u = b; u != e; ++u) {
        if (!placed && v < *u) {
          *dst++ = v;
          placed = true;
        }
        *dst++ = *u;
      }
      if (!placed) *dst++ = v;
    }
  }

  int entry_index(int row, int col) const {
    const int* first = cols_.data() + rowptr_[row];
    const int* last = cols_.data() + rowptr_[row + 1];
    const int* it = std::lower_bound(first, last, col);
    return static_cast<int>(it - cols_.data());
  }

  void assemble(const VelocityField& fibers, int heart_region) {
    const int nt = mesh_.tet_count();
    k_vals_.assign(cols_.size(), 0.0);
    ki_vals_.assign(cols_.size(), 0.0);
    for (int t = 0; t < nt; ++t) {
      const auto& q = mesh_.tets[t];
      int region = mesh_.region_labels[t];
      bool heart = region == heart_region;

      SymMat3 g_bulk, g_intra;
      if (heart) {
        Vec3 f = fibers.fiber[t], s = fibers.sheet[t], n = fibers.normal[t];
        g_intra = SymMat3::outer(f) * cond_.gi_f + SymMat3::outer(s) * cond_.gi_s +
                  SymMat3::outer(n) * cond_.gi_n;
        SymMat3 g_extra = SymMat3::outer(f) * cond_.ge_f +
                          SymMat3::outer(s) * cond_.ge_s +
                          SymMat3::outer(n) * cond_.ge_n;
        g_bulk = g_intra + g_extra;
      } else {
        double g = cond_.torso;
        if (region == kRegionBlood) g = cond_.blood;
        else if (region == kRegionLung) g = cond_.lung;
        g_bulk = SymMat3::identity() * g;
      }

      // P1 hat gradients: solve E^T grad = unit via Cramer (det = 6 V)
      Vec3 x0 = mesh_.vertices[q[0]];
      Vec3 e1 = mesh_.vertices[q[1]] - x0;
      Vec3 e2 = mesh_.vertices[q[2]] - x0;
      Vec3 e3 = mesh_.vertices[q[3]] - x0;
      double det6v = dot(e1, cross(e2, e3));
      Vec3 g1 = cross(e2, e3) / det6v;
      Vec3 g2 = cross(e3, e1) / det6v;
      Vec3 g3 = cross(e1, e2) / det6v;
      Vec3 g0 = (g1 + g2 + g3) * -1.0;
      Vec3 grads[4] = {g0, g1, g2, g3};
      double vol = mesh_.tet_volume(t);

      for (int a = 0; a < 4; ++a) {
        Vec3 gb = g_bulk.apply(grads[a]) * vol;
        Vec3 gi = heart ? g_intra.apply(grads[a]) * vol : Vec3{0, 0, 0};
        for (int b = 0; b < 4; ++b) {
          int idx = entry_index(q[a], q[b]);
          k_vals_[idx] += dot(gb, grads[b]);
          if (heart) ki_vals_[idx] += dot(gi, grads[b]);
        }
      }
    }
  }

  void spmv(const std::vector<double>& vals, const std::vector<double>& x,
            std::vector<double>& y) const {
    const int nv = mesh_.vertex_count();
    if (static_cast<int>(x.size()) != nv) throw ConfigError("spmv: size mismatch");
    y.assign(nv, 0.0);
    for (int v = 0; v < nv; ++v) {
      double acc = 0;
      for (int i = rowptr_[v]; i < rowptr_[v + 1]; ++i)
        acc += vals[i] * x[cols_[i]];
      y[v] = acc;
    }
  }

  static void remove_mean(std::vector<double>& r) {
    double m = 0;
    for (double v : r) m += v;
    m /= static_cast<double>(r.size());
    for (double& v : r) v -= m;
  }

  std::vector<double> pcg(const std::vector<double>& rhs, const FemOptions& opt,
                          const std::vector<double>* x0, PcgStats* stats) const {
    const int nv = mesh_.vertex_count();
    if (static_cast<int>(rhs.size()) != nv) throw ConfigError("pcg: rhs size");

    double rhs_norm = 0;
    for (double v : rhs) rhs_norm += v * v;
    rhs_norm = std::sqrt(rhs_norm);
    std::vector<double> x(nv, 0.0);
    if (x0) {
      if (static_cast<int>(x0->size()) != nv) throw ConfigError("pcg: x0 size");
      x = *x0;
    }
    if (rhs_norm == 0) {
      if (stats) *stats = {0, 0.0};
      return std::vector<double>(nv, 0.0);
    }

    std::vector<double> dinv(nv);
    for (int v = 0; v < nv; ++v) {
      double d = 0;
      for (int i = rowptr_[v]; i < rowptr_[v + 1]; ++i)
        if (cols_[i] == v) d = k_vals_[i];
      if (!(d > 0)) throw NumericError("non-positive stiffness diagonal");
      dinv[v] = 1.0 / d;
    }

    std::vector<double> r(nv), z(nv), p(nv), q(nv);
    spmv(k_vals_, x, q);
    for (int v = 0; v < nv; ++v) r[v] = rhs[v] - q[v];
    remove_mean(r);
    for (int v = 0; v < nv; ++v) z[v] = dinv[v] * r[v];
    remove_mean(z);
    p = z;
    double rz = 0;
    for (int v = 0; v < nv; ++v) rz += r[v] * z[v];

    int it = 0;
    double rel = 0;
    for (; it < opt.max_iter; ++it) {
      double rn = 0;
      for (double v : r) rn += v * v;
      rel = std::sqrt(rn) / rhs_norm;
      if (rel <= opt.tol) break;
      spmv(k_vals_, p, q);
      double pq = 0;
      for (int v = 0; v < nv; ++v) pq += p[v] * q[v];
      if (!(pq > 0)) throw NumericError("pcg: operator not positive on iterate");
      double alpha = rz / pq;
      for (int v = 0; v < nv; ++v) x[v] += alpha * p[v];
      for (int v = 0; v < nv; ++v) r[v] -= alpha * q[v];
      remove_mean(r);
      for (int v = 0; v < nv; ++v) z[v] = dinv[v] * r[v];
      remove_mean(z);
      double rz_new = 0;
      for (int v = 0; v < nv; ++v) rz_new += r[v] * z[v];
      double beta = rz_new / rz;
      rz = rz_new;
      for (int v = 0; v < nv; ++v) p[v] = z[v] + beta * p[v];
    }
    if (rel > opt.tol)
      throw NumericError("pcg failed to converge: relative residual " +
                         format_double(rel) + " after " +
                         std::to_string(it) + " iterations");
    if (stats) *stats = {it, rel};
    return x;
  }

  void shift_skin_mean(std::vector<double>& phi) const {
    double m = skin_mean(phi);
    for (double& v : phi) v -= m;
  }

  const TetMesh& mesh_;
  Conductivities cond_;
  std::vector<int> rowptr_, cols_;
  std::vector<double> k_vals_, ki_vals_;
  std::vector<double> skin_areas_;
  double skin_total_ = 0;
};

}  // namespace etwin
