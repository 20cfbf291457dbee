// Anisotropic eikonal solver on tetrahedral meshes.
//
// Solves sqrt(M grad(tau) . grad(tau)) = 1 with piecewise-constant
// squared-velocity tensors M per element and point sources ("PMJs": position
// + firing time).  Discretization: per-vertex Hopf-Lax updates
//
//   tau(v) <- min( tau(v), min_{faces F opposite v} min_{y in F}
//                  [ sum_i lambda_i tau(p_i) + sqrt(d' M^{-1} d) ] )
//
// where the inner face problem is minimized over barycentric coordinates
// with projected FISTA (fixed iteration count) plus exact closed-form
// refinement of the edge/corner boundary cases.  Sweeps are synchronous
// (Jacobi, two buffers) restricted to an active front: a vertex is
// re-evaluated only when one of its neighbors changed in the previous sweep,
// which is algebraically identical to a full Jacobi sweep.  Results are
// independent of iteration order and therefore deterministic.
//
// The solver records the converged provenance of every vertex (seed link or
// minimizing face with barycentric weights) on an adjoint tape, which is
// enough to differentiate the solution with respect to source timings and
// positions (see adjoint.hpp).
//
// Sources that fire too late to beat fronts arriving from elsewhere are
// overwritten by those fronts and flagged inactive.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/mesh.hpp"

namespace etwin {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct PMJ {
  Vec3 pos;
  double t = 0;  // firing time (ms)
};

struct PMJSet {
  std::vector<PMJ> pmjs;

  int size() const { return static_cast<int>(pmjs.size()); }
  PMJ& operator[](int i) { return pmjs[i]; }
  const PMJ& operator[](int i) const { return pmjs[i]; }

  std::uint64_t content_hash() const {
    Fnv1a h;
    h.feed(static_cast<std::uint64_t>(pmjs.size()));
    for (const auto& p : pmjs) {
      h.feed(p.pos.x); h.feed(p.pos.y); h.feed(p.pos.z); h.feed(p.t);
    }
    return h.digest();
  }
};

struct SolveOptions {
  double tolerance = 1e-4;  // stop when the largest per-sweep decrease (ms)
                            // falls below this; 0 runs to the exact fixed point
  int max_sweeps = 5000;
  int fista_iters = 10;     // fixed iteration count of the local face solver
};

// Provenance of one vertex value at convergence.
struct TapeEntry {
  enum Kind : std::int32_t { kUnset = 0, kSeed = 1, kFace = 2 };
  std::int32_t kind = kUnset;
  std::int32_t tet = -1;
  std::int32_t up[3] = {-1, -1, -1};  // face: upstream vertices; seed: up[0] = PMJ
  double l[3] = {0, 0, 0};            // barycentric weights (face entries)
};

struct AdjointTape {
  std::vector<TapeEntry> entries;        // per vertex
  std::vector<int> order;                // vertex ids, tau descending
  std::vector<std::uint8_t> pmj_on_boundary;  // seed landed on a tet boundary
  std::uint64_t problem_hash = 0;
};

struct ActivationMap {
  std::vector<double> tau;           // per vertex (ms)
  std::vector<int> activator;        // per vertex: PMJ whose front arrived first
  std::vector<std::uint8_t> pmj_active;  // per PMJ: kept at least one seed
  int sweeps = 0;
  double last_decrease = 0;
  bool converged = false;
  std::uint64_t problem_hash = 0;
};

class EikonalSolver {
 public:
  // Reduced quadratic of one (vertex, opposite face) pair:
  //   q(u1,u2) = u' Q u + 2 l . u + c0   (squared travel time to the face
  //   point with barycentric coordinates (u1, u2, 1-u1-u2))
  struct FaceQuad {
    double Q11, Q12, Q22, l1, l2, c0;
    double inv_lip;    // FISTA step size (inverse Lipschitz bound)
    double sqrt_qmin;  // sqrt of the minimum of q over the face (pruning bound)
    std::int32_t o1, o2, o3;  // face vertices
    std::int32_t tet;
  };

  struct FaceCandidate {
    double value = kInf;
    double l1 = 0, l2 = 0, l3 = 0;  // weights of o1, o2, o3
  };

  EikonalSolver(const TetMesh& mesh, const VelocityField& velocity)
      : mesh_(mesh), velocity_(velocity) {
    if (!mesh.finalized()) throw GeometryError("mesh not finalized");
    velocity.validate(mesh);
    build_quads();
    base_hash_ = mesh.content_hash() ^ (velocity.content_hash() * 0x9e3779b97f4a7c15ull);
  }

  const TetMesh& mesh() const { return mesh_; }
  const VelocityField& velocity() const { return velocity_; }

  // ---- seeding -------------------------------------------------------------

  struct SeedInfo {
    int tet = -1;
    std::array<int, 4> verts{};
    std::array<double, 4> timings{};
    bool on_boundary = false;  // PMJ lies on a face/edge of its tet
  };

  // Off-node seeding: the PMJ timing is transported to the corners of the
  // containing tet under that element's metric.
  SeedInfo seed_offnode(const PMJ& pmj) const {
    auto loc = mesh_.locate_point(pmj.pos);
    if (!loc.inside)
      throw GeometryError("PMJ position outside the mesh (distance " +
                          format_double(loc.distance) + " mm); project first");
    SeedInfo s;
    s.tet = loc.tet;
    const SymMat3& minv = minv_[loc.tet];
    double min_bary = 1;
    for (int k = 0; k < 4; ++k) {
      int v = mesh_.tets[loc.tet][k];
      s.verts[k] = v;
      Vec3 d = mesh_.vertices[v] - pmj.pos;
      s.timings[k] = pmj.t + std::sqrt(std::max(0.0, minv.quad(d)));
      min_bary = std::min(min_bary, loc.bary[k]);
    }
    s.on_boundary = min_bary < 1e-9;
    return s;
  }

  // ---- local solver ----------------------------------------------------------

  // Minimum of  tau . lambda + sqrt(q(lambda))  over the face simplex, given
  // the corner values.  Infinite corner values restrict the search to the
  // sub-simplex of finite corners.  Corners, edges, and the interior all have
  // closed-form stationary points; a fixed budget of projected FISTA
  // iterations covers metrically degenerate faces where the interior algebra
  // cannot be trusted.
  static FaceCandidate face_candidate(const FaceQuad& f, double t1, double t2,
                                      double t3, int fista_iters) {
    FaceCandidate best;
    const bool f1 = std::isfinite(t1), f2 = std::isfinite(t2),
               f3 = std::isfinite(t3);
    if (!f1 && !f2 && !f3) return best;

    // Recover full Gram entries from the reduced form.
    const double G33 = f.c0;
    const double G13 = f.l1 + f.c0, G23 = f.l2 + f.c0;
    const double G11 = f.Q11 + 2 * f.l1 + f.c0;
    const double G22 = f.Q22 + 2 * f.l2 + f.c0;
    const double G12 = f.Q12 + f.l1 + f.l2 + f.c0;

    auto consider = [&best](double v, double a, double b, double c) {
      if (v < best.value) best = {v, a, b, c};
    };

    // corners
    if (f1) consider(t1 + std::sqrt(G11), 1, 0, 0);
    if (f2) consider(t2 + std::sqrt(G22), 0, 1, 0);
    if (f3) consider(t3 + std::sqrt(G33), 0, 0, 1);

    // exact edge minimizations (s in (0,1) from corner i to corner j)
    auto edge = [&](double ti, double tj, double Gii, double Gij, double Gjj,
                    int which) {
      double A = Gii - 2 * Gij + Gjj;  // > 0 for distinct corners
      double B = Gij - Gii, C = Gii;
      double beta = tj - ti;
      double D = A - beta * beta;
      double a2 = A * D, a1 = 2 * B * D, a0 = B * B - beta * beta * C;
      double roots[2];
      int nr = 0;
      if (std::abs(a2) > 1e-300) {
        double disc = a1 * a1 - 4 * a2 * a0;
        if (disc >= 0) {
          double sq = std::sqrt(disc);
          roots[nr++] = (-a1 + sq) / (2 * a2);
          roots[nr++] = (-a1 - sq) / (2 * a2);
        }
      } else if (std::abs(a1) > 1e-300) {
        roots[nr++] = -a0 / a1;
      }
      for (int r = 0; r < nr; ++r) {
        double s = roots[r];
        if (!(s > 0 && s < 1)) continue;
        double q = A * s * s + 2 * B * s + C;
        if (q <= 0) continue;
        // stationarity requires sign(As+B) == -sign(beta)
        if ((A * s + B) * beta > 0) continue;
        double v = ti + beta * s + std::sqrt(q);
        double li = 1 - s, lj = s;
        if (which == 0) consider(v, li, lj, 0);        // edge 1-2
        else if (which == 1) consider(v, li, 0, lj);   // edge 1-3
        else consider(v, 0, li, lj);                   // edge 2-3
      }
    };
    if (f1 && f2) edge(t1, t2, G11, G12, G22, 0);
    if (f1 && f3) edge(t1, t3, G11, G13, G33, 1);
    if (f2 && f3) edge(t2, t3, G22, G23, G33, 2);

    // interior minimizer
    if (f1 && f2 && f3) {
      // The face problem is convex, so a corner/edge solution satisfying the
      // simplex KKT conditions is already the global minimum and the interior
      // search cannot improve on it.
      {
        const double l1 = best.l1, l2 = best.l2, l3 = best.l3;
        const double w1 = G11 * l1 + G12 * l2 + G13 * l3;
        const double w2 = G12 * l1 + G22 * l2 + G23 * l3;
        const double w3 = G13 * l1 + G23 * l2 + G33 * l3;
        const double r2 = l1 * w1 + l2 * w2 + l3 * w3;
        if (r2 > 0) {
          const double r = std::sqrt(r2);
          const double g1 = t1 + w1 / r, g2 = t2 + w2 / r, g3 = t3 + w3 / r;
          const double tol =
              1e-10 * (std::abs(g1) + std::abs(g2) + std::abs(g3) + 1);
          double amax = -kInf, amin = kInf, imin = kInf;
          auto acc = [&](double l, double g) {
            if (l > 0) {
              amax = std::max(amax, g);
              amin = std::min(amin, g);
            } else {
              imin = std::min(imin, g);
            }
          };
          acc(l1, g1);
          acc(l2, g2);
          acc(l3, g3);
          if (amax - amin <= tol && imin >= amax - tol) return best;
        }
      }
      const double c1 = t1 - t3, c2 = t2 - t3;
      auto feval = [&](double u1, double u2) {
        double q = f.Q11 * u1 * u1 + 2 * f.Q12 * u1 * u2 + f.Q22 * u2 * u2 +
                   2 * (f.l1 * u1 + f.l2 * u2) + f.c0;
        return c1 * u1 + c2 * u2 + std::sqrt(std::max(q, 0.0));
      };

      // Algebraic interior stationary point.  Stationarity of
      //   F(u) = c.u + sqrt(q(u))   demands   Q u + l = -c sqrt(q),
      // and substituting u(r) = -Q^{-1}(l + c r) back into q leaves
      //   r^2 (1 - c' Q^{-1} c) = c0 - l' Q^{-1} l,
      // an explicit solution.  When it lands inside the simplex it is the
      // exact interior minimum (F is convex, so the stationary point is
      // global); when it does not exist (supersonic timing gradient,
      // c'Q^{-1}c >= 1) or falls outside, the minimum lies on the simplex
      // boundary, which the corner and edge solutions above cover exactly.
      // The fixed-budget first-order iteration below only polishes
      // metrically degenerate faces where the algebra is untrustworthy.
      const double det = f.Q11 * f.Q22 - f.Q12 * f.Q12;
      const double dscale = f.Q11 * f.Q22 + f.Q12 * f.Q12;
      bool degenerate = true;
      if (det > 1e-12 * dscale) {
        const double L = (f.l1 * (f.Q22 * f.l1 - f.Q12 * f.l2) +
                          f.l2 * (f.Q11 * f.l2 - f.Q12 * f.l1)) /
                         det;
        const double A = (c1 * (f.Q22 * c1 - f.Q12 * c2) +
                          c2 * (f.Q11 * c2 - f.Q12 * c1)) /
                         det;
        const double h = f.c0 - L;  // squared metric distance to the face plane
        if (h > 0) {
          degenerate = false;
          if (A < 1) {
            const double r = std::sqrt(h / (1 - A));
            const double b1 = f.l1 + c1 * r, b2 = f.l2 + c2 * r;
            const double u1 = -(f.Q22 * b1 - f.Q12 * b2) / det;
            const double u2 = -(f.Q11 * b2 - f.Q12 * b1) / det;
            if (u1 >= 0 && u2 >= 0 && u1 + u2 <= 1)
              consider(t3 + feval(u1, u2), u1, u2, 1 - u1 - u2);
          }
        }
      }

      if (degenerate && fista_iters > 0) {
        auto project = [](double& u1, double& u2) {
          double a1 = u1 > 0 ? u1 : 0, a2 = u2 > 0 ? u2 : 0;
          if (a1 + a2 <= 1) { u1 = a1; u2 = a2; return; }
          double t = (u1 + u2 - 1) * 0.5;
          double b1 = u1 - t, b2 = u2 - t;
          if (b1 < 0) { b1 = 0; b2 = 1; }
          else if (b2 < 0) { b1 = 1; b2 = 0; }
          else if (b1 > 1) { b1 = 1; b2 = 0; }
          else if (b2 > 1) { b1 = 0; b2 = 1; }
          u1 = b1; u2 = b2;
        };

        double u1 = 1.0 / 3, u2 = 1.0 / 3;
        double y1 = u1, y2 = u2;
        double tk = 1;
        double fu = feval(u1, u2);
        double bu1 = u1, bu2 = u2, bf = fu;
        for (int it = 0; it < fista_iters; ++it) {
          double q = f.Q11 * y1 * y1 + 2 * f.Q12 * y1 * y2 + f.Q22 * y2 * y2 +
                     2 * (f.l1 * y1 + f.l2 * y2) + f.c0;
          double delta = std::sqrt(std::max(q, 1e-300));
          double g1 = c1 + (f.Q11 * y1 + f.Q12 * y2 + f.l1) / delta;
          double g2 = c2 + (f.Q12 * y1 + f.Q22 * y2 + f.l2) / delta;
          double n1 = y1 - f.inv_lip * g1, n2 = y2 - f.inv_lip * g2;
          project(n1, n2);
          double fn = feval(n1, n2);
          if (fn < bf) { bf = fn; bu1 = n1; bu2 = n2; }
          if (fn > fu) {  // restart momentum
            tk = 1;
            y1 = n1; y2 = n2;
          } else {
            double tn = 0.5 * (1 + std::sqrt(1 + 4 * tk * tk));
            double m = (tk - 1) / tn;
            y1 = n1 + m * (n1 - u1);
            y2 = n2 + m * (n2 - u2);
            tk = tn;
          }
          u1 = n1; u2 = n2; fu = fn;
        }
        // feval is relative to corner 3; add its value back when comparing
        if (t3 + bf < best.value) best = {t3 + bf, bu1, bu2, 1 - bu1 - bu2};
      }
    }
    return best;
  }

  // Spec'd local update: best candidate for vertex v given per-vertex values,
  // including v's current value.
  double local_hopf_lax(int v, const std::vector<double>& tau,
                        int fista_iters = 10) const {
    double best = tau[v];
    for (int i = quad_off_[v]; i < quad_off_[v + 1]; ++i) {
      const FaceQuad& f = quads_[i];
      double t1 = tau[f.o1], t2 = tau[f.o2], t3 = tau[f.o3];
      if (std::min({t1, t2, t3}) + f.sqrt_qmin >= best) continue;
      FaceCandidate c = face_candidate(f, t1, t2, t3, fista_iters);
      best = std::min(best, c.value);
    }
    return best;
  }

  // Access to the precomputed face quadratics (mainly for tests).
  std::pair<const FaceQuad*, const FaceQuad*> vertex_faces(int v) const {
    return {quads_.data() + quad_off_[v], quads_.data() + quad_off_[v + 1]};
  }

  const SymMat3& tet_metric_inv(int t) const { return minv_[t]; }

  // ---- solve -----------------------------------------------------------------

  ActivationMap solve(const PMJSet& pmjs, const SolveOptions& opt = {},
                      AdjointTape* tape = nullptr) const {
    const int nv = mesh_.vertex_count();
    if (pmjs.size() == 0) throw GeometryError("solve: empty PMJ set");

    ActivationMap out;
    out.tau.assign(nv, kInf);
    out.activator.assign(nv, -1);
    out.pmj_active.assign(pmjs.size(), 0);
    out.problem_hash = problem_hash(pmjs);

    std::vector<TapeEntry> entries(nv);
    std::vector<std::uint8_t> pmj_boundary(pmjs.size(), 0);

    // Active front: a vertex is re-evaluated in sweep k+1 only if one of its
    // tet-sharing neighbors (or itself) changed in sweep k.  Unchanged
    // vertices would reproduce their previous value exactly, so this is
    // identical to re-evaluating everything.
    std::vector<int> frontier, next;
    std::vector<std::uint32_t> stamp(nv, 0);
    std::uint32_t epoch = 1;  // 0 is the "never pushed" stamp
    auto push_next = [&](int v) {
      if (stamp[v] != epoch) {
        stamp[v] = epoch;
        next.push_back(v);
      }
    };

    // Seed: PMJ timings transported to the corners of the containing tets.
    // Strict improvement + ascending PMJ order makes the lowest index win
    // exact ties.
    for (int j = 0; j < pmjs.size(); ++j) {
      SeedInfo s = seed_offnode(pmjs[j]);
      pmj_boundary[j] = s.on_boundary ? 1 : 0;
      for (int k = 0; k < 4; ++k) {
        int v = s.verts[k];
        if (s.timings[k] < out.tau[v]) {
          out.tau[v] = s.timings[k];
          out.activator[v] = j;
          TapeEntry e;
          e.kind = TapeEntry::kSeed;
          e.tet = s.tet;
          e.up[0] = j;
          entries[v] = e;
        }
        push_next(v);
        auto [nb, ne] = mesh_.vertex_neighbors(v);
        for (const int* u = nb; u != ne; ++u) push_next(*u);
      }
    }
    frontier.swap(next);

    std::vector<double> tau_prev(out.tau);
    std::vector<int> act_prev(out.activator);

    int sweep = 0;
    double last_max = 0;
    bool converged = frontier.empty();
    while (!converged && sweep < opt.max_sweeps) {
      ++sweep;
      ++epoch;
      next.clear();
      double max_dec = 0;
      for (int v : frontier) {
        double cur = tau_prev[v];
        double best = cur;
        const FaceQuad* fq = quads_.data() + quad_off_[v];
        const FaceQuad* fe = quads_.data() + quad_off_[v + 1];
        TapeEntry rec;
        bool improved = false;
        for (const FaceQuad* fp = fq; fp != fe; ++fp) {
          double t1 = tau_prev[fp->o1], t2 = tau_prev[fp->o2],
                 t3 = tau_prev[fp->o3];
          // lower bound on any candidate from this face
          if (std::min({t1, t2, t3}) + fp->sqrt_qmin >= best) continue;
          FaceCandidate c = face_candidate(*fp, t1, t2, t3, opt.fista_iters);
          if (c.value < best) {
            best = c.value;
            rec.kind = TapeEntry::kFace;
            rec.tet = fp->tet;
            rec.up[0] = fp->o1; rec.up[1] = fp->o2; rec.up[2] = fp->o3;
            rec.l[0] = c.l1; rec.l[1] = c.l2; rec.l[2] = c.l3;
            improved = true;
          }
        }
        if (improved) {
          out.tau[v] = best;
          entries[v] = rec;
          // activator label: argmax barycentric weight among the upstream
          // vertices; exact weight ties go to the smaller PMJ index
          int lab = -1;
          double lmax = -1;
          for (int k = 0; k < 3; ++k) {
            int cl = act_prev[rec.up[k]];
            if (rec.l[k] > lmax) {
              lmax = rec.l[k];
              lab = cl;
            } else if (rec.l[k] == lmax && cl >= 0 && (lab < 0 || cl < lab)) {
              lab = cl;
            }
          }
          out.activator[v] = lab;
          double dec = cur - best;
          if (dec > max_dec) max_dec = dec;
          // only tet-sharing neighbors read v's value, so only they can
          // change next sweep (v's own candidates never involve v)
          auto [nb, ne2] = mesh_.vertex_neighbors(v);
          for (const int* u = nb; u != ne2; ++u) push_next(*u);
        }
      }
      // commit sweep results (Jacobi two-buffer semantics)
      std::copy(out.tau.begin(), out.tau.end(), tau_prev.begin());
      std::copy(out.activator.begin(), out.activator.end(), act_prev.begin());
      frontier.swap(next);
      last_max = max_dec;
      if (max_dec < opt.tolerance || frontier.empty()) converged = true;
    }

    out.sweeps = sweep;
    out.last_decrease = last_max;
    out.converged = converged;

    // Active PMJs: kept at least one surviving seed link.
    for (int v = 0; v < nv; ++v)
      if (entries[v].kind == TapeEntry::kSeed) out.pmj_active[entries[v].up[0]] = 1;

    if (tape) {
      tape->entries = std::move(entries);
      tape->pmj_on_boundary = std::move(pmj_boundary);
      tape->problem_hash = out.problem_hash;
      tape->order.resize(nv);
      for (int v = 0; v < nv; ++v) tape->order[v] = v;
      std::sort(tape->order.begin(), tape->order.end(), [&](int a, int b) {
        if (out.tau[a] != out.tau[b]) return out.tau[a] > out.tau[b];
        return a < b;
      });
    }
    return out;
  }

  std::uint64_t problem_hash(const PMJSet& pmjs) const {
    return base_hash_ ^ (pmjs.content_hash() * 0xbf58476d1ce4e5b9ull);
  }

 private:
  void build_quads() {
    const int nv = mesh_.vertex_count(), nt = mesh_.tet_count();
    minv_.resize(nt);
    for (int t = 0; t < nt; ++t) minv_[t] = velocity_.tensor_inv(t);

    quad_off_.assign(nv + 1, 0);
    for (const auto& q : mesh_.tets)
      for (int k = 0; k < 4; ++k) quad_off_[q[k] + 1]++;
    for (int v = 0; v < nv; ++v) quad_off_[v + 1] += quad_off_[v];
    quads_.resize(static_cast<std::size_t>(nt) * 4);
    std::vector<int> cursor(quad_off_.begin(), quad_off_.end() - 1);
    for (int t = 0; t < nt; ++t) {
      const auto& q = mesh_.tets[t];
      const SymMat3& minv = minv_[t];
      for (int s = 0; s < 4; ++s) {
        int v = q[s];
        int others[3];
        int n = 0;
        for (int k = 0; k < 4; ++k)
          if (k != s) others[n++] = q[k];
        Vec3 xv = mesh_.vertices[v];
        Vec3 e1 = mesh_.vertices[others[0]] - xv;
        Vec3 e2 = mesh_.vertices[others[1]] - xv;
        Vec3 e3 = mesh_.vertices[others[2]] - xv;
        double G11 = minv.quad(e1), G22 = minv.quad(e2), G33 = minv.quad(e3);
        double G12 = minv.bilinear(e1, e2), G13 = minv.bilinear(e1, e3),
               G23 = minv.bilinear(e2, e3);
        FaceQuad f;
        f.o1 = others[0]; f.o2 = others[1]; f.o3 = others[2];
        f.tet = t;
        f.Q11 = G11 - 2 * G13 + G33;
        f.Q12 = G12 - G13 - G23 + G33;
        f.Q22 = G22 - 2 * G23 + G33;
        f.l1 = G13 - G33;
        f.l2 = G23 - G33;
        f.c0 = G33;
        // Lipschitz bound: lam_max(Q) / sqrt(min_plane q)
        double tr = 0.5 * (f.Q11 + f.Q22);
        double dd = 0.5 * (f.Q11 - f.Q22);
        double lam = tr + std::sqrt(dd * dd + f.Q12 * f.Q12);
        double det = f.Q11 * f.Q22 - f.Q12 * f.Q12;
        double qplane = f.c0;
        bool plane_inside = false;
        if (det > 0) {
          // unconstrained minimizer of q over the plane
          double s1 = (f.Q22 * f.l1 - f.Q12 * f.l2) / det;
          double s2 = (f.Q11 * f.l2 - f.Q12 * f.l1) / det;
          qplane = f.c0 - (f.l1 * s1 + f.l2 * s2);
          plane_inside = s1 < 0 && s2 < 0 && s1 + s2 > -1;
        }
        // exact minimum of q over the face simplex: any update from this face
        // costs at least min-corner-time + sqrt_qmin, which prunes faces that
        // cannot beat the incumbent value
        double qmin = std::min({G11, G22, G33});
        auto edge_qmin = [&qmin](double gii, double gij, double gjj) {
          double a = gii - 2 * gij + gjj, b = gij - gii;
          if (a > 0) {
            double s = -b / a;
            if (s > 0 && s < 1) qmin = std::min(qmin, gii - b * b / a);
          }
        };
        edge_qmin(G11, G12, G22);
        edge_qmin(G11, G13, G33);
        edge_qmin(G22, G23, G33);
        if (plane_inside) qmin = std::min(qmin, qplane);
        f.sqrt_qmin = std::sqrt(std::max(qmin, 0.0));
        qplane = std::max(qplane, 1e-12 * std::max(f.c0, 1e-300));
        f.inv_lip = std::sqrt(qplane) / std::max(lam, 1e-300);
        quads_[cursor[v]++] = f;
      }
    }
  }

  const TetMesh& mesh_;
  const VelocityField& velocity_;
  std::vector<SymMat3> minv_;
  std::vector<FaceQuad> quads_;
  std::vector<int> quad_off_;
  std::uint64_t base_hash_ = 0;
};

}  // namespace etwin
