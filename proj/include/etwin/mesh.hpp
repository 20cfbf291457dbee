// Tetrahedral mesh container with the geometric queries the rest of the
// library needs: vertex/tet adjacency, point location (uniform-bin
// acceleration), exact point-to-surface distance (AABB tree), area-weighted
// surface sampling, and per-element orthotropic tensor construction.
//
// A TetMesh is immutable after finalize(); all queries are const and safe for
// concurrent readers.
#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/rng.hpp"

namespace etwin {

inline constexpr double kInsideBaryTol = -1e-9;  // barycentric inside test

// --------------------------------------------------------------- triangle ---

// Closest point on triangle (a,b,c) to p (Ericson, Real-Time Collision
// Detection, ch. 5).
inline Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a,
                                      const Vec3& b, const Vec3& c) {
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return a;

  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return b;

  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));

  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return c;

  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));

  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
    return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

  double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

inline double triangle_area(const Vec3& a, const Vec3& b, const Vec3& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

// -------------------------------------------------------------- AABB tree ---

// Static AABB tree over a triangle set; exact nearest-point queries.
class TriangleBvh {
 public:
  struct Hit {
    double dist2 = std::numeric_limits<double>::infinity();
    Vec3 point;
    int tri = -1;
  };

  void build(const std::vector<Vec3>& verts,
             const std::vector<std::array<int, 3>>& tris) {
    verts_ = &verts;
    tris_ = &tris;
    nodes_.clear();
    order_.resize(tris.size());
    std::iota(order_.begin(), order_.end(), 0);
    if (tris.empty()) return;
    std::vector<Vec3> centroids(tris.size());
    for (std::size_t i = 0; i < tris.size(); ++i) {
      const auto& t = tris[i];
      centroids[i] = (verts[t[0]] + verts[t[1]] + verts[t[2]]) / 3.0;
    }
    nodes_.reserve(2 * tris.size());
    build_node(0, static_cast<int>(tris.size()), centroids);
  }

  bool empty() const { return nodes_.empty(); }

  Hit closest(const Vec3& p) const {
    Hit best;
    if (nodes_.empty()) return best;
    struct Entry { double d2; int node; };
    std::vector<Entry> stack;
    stack.reserve(64);
    stack.push_back({box_dist2(0, p), 0});
    while (!stack.empty()) {
      Entry e = stack.back();
      stack.pop_back();
      if (e.d2 >= best.dist2) continue;
      const Node& n = nodes_[e.node];
      if (n.count > 0) {  // leaf
        for (int i = n.a; i < n.a + n.count; ++i) {
          const auto& t = (*tris_)[order_[i]];
          Vec3 q = closest_point_on_triangle(p, (*verts_)[t[0]],
                                             (*verts_)[t[1]], (*verts_)[t[2]]);
          double d2 = (q - p).squared_norm();
          if (d2 < best.dist2) best = {d2, q, order_[i]};
        }
      } else {
        double da = box_dist2(n.a, p), db = box_dist2(n.b, p);
        // Push the farther child first so the nearer one is explored next.
        if (da < db) {
          if (db < best.dist2) stack.push_back({db, n.b});
          if (da < best.dist2) stack.push_back({da, n.a});
        } else {
          if (da < best.dist2) stack.push_back({da, n.a});
          if (db < best.dist2) stack.push_back({db, n.b});
        }
      }
    }
    return best;
  }

 private:
  struct Node {
    Vec3 lo, hi;
    int a = -1;      // left child, or first triangle slot for leaves
    int b = -1;      // right child
    int count = 0;   // 0 for internal nodes
  };

  double box_dist2(int node, const Vec3& p) const {
    const Node& n = nodes_[node];
    double d2 = 0;
    for (int k = 0; k < 3; ++k) {
      double v = p[k];
      if (v < n.lo[k]) d2 += (n.lo[k] - v) * (n.lo[k] - v);
      else if (v > n.hi[k]) d2 += (v - n.hi[k]) * (v - n.hi[k]);
    }
    return d2;
  }

  int build_node(int begin, int end, const std::vector<Vec3>& centroids) {
    int idx = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (int i = begin; i < end; ++i) {
      const auto& t = (*tris_)[order_[i]];
      for (int k = 0; k < 3; ++k) {
        lo = min(lo, (*verts_)[t[k]]);
        hi = max(hi, (*verts_)[t[k]]);
      }
    }
    nodes_[idx].lo = lo;
    nodes_[idx].hi = hi;
    int count = end - begin;
    if (count <= 4) {
      nodes_[idx].a = begin;
      nodes_[idx].count = count;
      return idx;
    }
    Vec3 clo{1e300, 1e300, 1e300}, chi{-1e300, -1e300, -1e300};
    for (int i = begin; i < end; ++i) {
      clo = min(clo, centroids[order_[i]]);
      chi = max(chi, centroids[order_[i]]);
    }
    Vec3 ext = chi - clo;
    int axis = 0;
    if (ext.y > ext.x) axis = 1;
    if (ext.z > ext[axis]) axis = 2;
    int mid = begin + count / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid,
                     order_.begin() + end, [&](int a, int b) {
                       double ca = centroids[a][axis], cb = centroids[b][axis];
                       if (ca != cb) return ca < cb;
                       return a < b;  // deterministic tie-break
                     });
    int l = build_node(begin, mid, centroids);
    int r = build_node(mid, end, centroids);
    nodes_[idx].a = l;
    nodes_[idx].b = r;
    nodes_[idx].count = 0;
    return idx;
  }

  const std::vector<Vec3>* verts_ = nullptr;
  const std::vector<std::array<int, 3>>* tris_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

// ---------------------------------------------------------------- TetMesh ---

struct LocateResult {
  bool inside = false;
  int tet = -1;                      // containing tet (lowest index on ties)
  std::array<double, 4> bary{};      // barycentric coordinates in that tet
  Vec3 nearest;                      // closest boundary point if outside
  double distance = 0;               // distance to domain if outside
};

struct SurfaceHit {
  double distance = 0;
  Vec3 point;    // closest point on the surface
  int tri = -1;  // triangle index within the named surface
};

struct Submesh;

class TetMesh {
 public:
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 4>> tets;
  std::vector<int> region_labels;  // per tet; empty means all zero
  std::map<std::string, std::vector<std::array<int, 3>>> surfaces;

  // ---- construction -------------------------------------------------------

  // Validates the mesh, builds adjacency/boundary/query structures.
  // Must be called once, after which the mesh is read-only.
  void finalize() {
    const int nv = static_cast<int>(vertices.size());
    const int nt = static_cast<int>(tets.size());
    if (nv == 0 || nt == 0) throw GeometryError("empty mesh");
    if (region_labels.empty()) region_labels.assign(nt, 0);
    if (static_cast<int>(region_labels.size()) != nt)
      throw GeometryError("region label count does not match tet count");

    volumes_.resize(nt);
    total_volume_ = 0;
    for (int t = 0; t < nt; ++t) {
      for (int k = 0; k < 4; ++k) {
        int v = tets[t][k];
        if (v < 0 || v >= nv) throw GeometryError("tet vertex index out of range");
      }
      double vol = signed_volume(t);
      if (!(vol > 0))
        throw GeometryError("degenerate or negatively oriented tet " +
                            std::to_string(t));
      volumes_[t] = vol;
      total_volume_ += vol;
    }

    build_vertex_adjacency();
    build_boundary();
    build_bins();
    build_surface_trees();
    compute_hash();
    finalized_ = true;
  }

  bool finalized() const { return finalized_; }
  std::uint64_t content_hash() const { return content_hash_; }

  // ---- basic geometry ------------------------------------------------------

  int vertex_count() const { return static_cast<int>(vertices.size()); }
  int tet_count() const { return static_cast<int>(tets.size()); }

  double signed_volume(int t) const {
    const auto& q = tets[t];
    Vec3 a = vertices[q[1]] - vertices[q[0]];
    Vec3 b = vertices[q[2]] - vertices[q[0]];
    Vec3 c = vertices[q[3]] - vertices[q[0]];
    return a.cross(b).dot(c) / 6.0;
  }

  double tet_volume(int t) const { return volumes_[t]; }
  double total_volume() const { return total_volume_; }

  Vec3 tet_centroid(int t) const {
    const auto& q = tets[t];
    return (vertices[q[0]] + vertices[q[1]] + vertices[q[2]] + vertices[q[3]]) *
           0.25;
  }

  // Lumped vertex volume: each tet contributes a quarter of its volume to
  // each of its corners.  Sums exactly to total_volume().
  std::vector<double> lumped_vertex_volumes() const {
    std::vector<double> w(vertices.size(), 0.0);
    for (int t = 0; t < tet_count(); ++t) {
      double q = volumes_[t] * 0.25;
      for (int k = 0; k < 4; ++k) w[tets[t][k]] += q;
    }
    return w;
  }

  // ---- adjacency -----------------------------------------------------------

  // CSR: tets incident to a vertex.
  std::pair<const int*, const int*> vertex_tets(int v) const {
    return {v2t_.data() + v2t_off_[v], v2t_.data() + v2t_off_[v + 1]};
  }
  // CSR: vertices sharing at least one tet with v (excluding v).
  std::pair<const int*, const int*> vertex_neighbors(int v) const {
    return {v2v_.data() + v2v_off_[v], v2v_.data() + v2v_off_[v + 1]};
  }

  const std::vector<std::array<int, 3>>& boundary_faces() const {
    return boundary_faces_;
  }

  // ---- point location ------------------------------------------------------

  std::array<double, 4> barycentric(int t, const Vec3& p) const {
    const auto& q = tets[t];
    Vec3 a = vertices[q[0]], b = vertices[q[1]], c = vertices[q[2]],
         d = vertices[q[3]];
    Vec3 e1 = b - a, e2 = c - a, e3 = d - a, ep = p - a;
    double det = e1.cross(e2).dot(e3);
    if (det == 0) throw GeometryError("degenerate tet in barycentric()");
    double l1 = ep.cross(e2).dot(e3) / det;
    double l2 = e1.cross(ep).dot(e3) / det;
    double l3 = e1.cross(e2).dot(ep) / det;
    return {1.0 - l1 - l2 - l3, l1, l2, l3};
  }

  // Locates p in the mesh.  Inside (barycentric >= kInsideBaryTol in some
  // tet): returns the lowest-index containing tet.  Outside: reports the
  // closest boundary point and distance.
  LocateResult locate_point(const Vec3& p) const {
    require_finalized();
    LocateResult r;
    int best_tet = -1;
    std::array<double, 4> best_bary{};
    auto [cb, ce] = bin_candidates(p);
    for (const int* it = cb; it != ce; ++it) {
      int t = *it;
      auto bary = barycentric(t, p);
      double m = std::min(std::min(bary[0], bary[1]), std::min(bary[2], bary[3]));
      if (m >= kInsideBaryTol) {
        if (best_tet < 0 || t < best_tet) {
          best_tet = t;
          best_bary = bary;
        }
      }
    }
    if (best_tet >= 0) {
      r.inside = true;
      r.tet = best_tet;
      r.bary = best_bary;
      r.nearest = p;
      r.distance = 0;
      return r;
    }
    auto hit = boundary_tree_.closest(p);
    r.inside = false;
    r.nearest = hit.point;
    r.distance = std::sqrt(hit.dist2);
    return r;
  }

  // ---- named surfaces ------------------------------------------------------

  const std::vector<std::array<int, 3>>& surface(const std::string& name) const {
    auto it = surfaces.find(name);
    if (it == surfaces.end())
      throw GeometryError("unknown surface '" + name + "'");
    return it->second;
  }

  SurfaceHit closest_surface_point(const Vec3& p, const std::string& name) const {
    require_finalized();
    auto it = surface_trees_.find(name);
    if (it == surface_trees_.end())
      throw GeometryError("unknown surface '" + name + "'");
    auto hit = it->second.closest(p);
    if (hit.tri < 0) throw GeometryError("surface '" + name + "' is empty");
    return {std::sqrt(hit.dist2), hit.point, hit.tri};
  }

  double surface_distance(const Vec3& p, const std::string& name) const {
    return closest_surface_point(p, name).distance;
  }

  // Closest point over the whole mesh boundary.
  SurfaceHit closest_boundary_point(const Vec3& p) const {
    require_finalized();
    auto hit = boundary_tree_.closest(p);
    if (hit.tri < 0) throw GeometryError("mesh has no boundary");
    return {std::sqrt(hit.dist2), hit.point, hit.tri};
  }

  double surface_area(const std::string& name) const {
    double a = 0;
    for (const auto& t : surface(name))
      a += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    return a;
  }

  // Per-vertex lumped area of a named surface (triangle area / 3 per corner),
  // indexed by mesh vertex id; vertices not on the surface get zero.
  std::vector<double> lumped_surface_areas(const std::string& name) const {
    std::vector<double> w(vertices.size(), 0.0);
    for (const auto& t : surface(name)) {
      double a = triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]) / 3.0;
      for (int k = 0; k < 3; ++k) w[t[k]] += a;
    }
    return w;
  }

  // Uniform sampling of a named surface: triangle chosen with probability
  // proportional to area, position uniform within the triangle.  Fixed draw
  // count per sample -> deterministic for a given seed regardless of n.
  std::vector<Vec3> sample_surface_uniform(const std::string& name, int n,
                                           std::uint64_t seed) const {
    const auto& tris = surface(name);
    if (tris.empty()) throw GeometryError("surface '" + name + "' is empty");
    std::vector<double> cum(tris.size());
    double acc = 0;
    for (std::size_t i = 0; i < tris.size(); ++i) {
      const auto& t = tris[i];
      acc += triangle_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
      cum[i] = acc;
    }
    if (!(acc > 0)) throw GeometryError("surface '" + name + "' has zero area");
    Rng rng(seed);
    std::vector<Vec3> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
      double r = rng.uniform() * acc;
      std::size_t k =
          std::lower_bound(cum.begin(), cum.end(), r) - cum.begin();
      if (k >= tris.size()) k = tris.size() - 1;
      double u = rng.uniform(), v = rng.uniform();
      if (u + v > 1) { u = 1 - u; v = 1 - v; }
      const auto& t = tris[k];
      out.push_back(vertices[t[0]] * (1 - u - v) + vertices[t[1]] * u +
                    vertices[t[2]] * v);
    }
    return out;
  }

  // ---- region extraction ---------------------------------------------------

  // Extracts the sub-mesh of all tets with the given region label, keeping
  // any named surface triangles whose vertices all survive.  Defined after
  // Submesh below.
  Submesh extract_region(int label) const;

 private:
  void require_finalized() const {
    if (!finalized_) throw GeometryError("TetMesh::finalize() not called");
  }

  void build_vertex_adjacency() {
    const int nv = vertex_count(), nt = tet_count();
    v2t_off_.assign(nv + 1, 0);
    for (const auto& q : tets)
      for (int k = 0; k < 4; ++k) v2t_off_[q[k] + 1]++;
    for (int v = 0; v < nv; ++v) v2t_off_[v + 1] += v2t_off_[v];
    v2t_.resize(4 * nt);
    std::vector<int> cursor(v2t_off_.begin(), v2t_off_.end() - 1);
    for (int t = 0; t < nt; ++t)
      for (int k = 0; k < 4; ++k) v2t_[cursor[tets[t][k]]++] = t;

    // vertex->vertex: union of tet corners over incident tets
    v2v_off_.assign(nv + 1, 0);
    std::vector<int> scratch;
    std::vector<int> counts(nv, 0);
    for (int v = 0; v < nv; ++v) {
      scratch.clear();
      for (int i = v2t_off_[v]; i < v2t_off_[v + 1]; ++i)
        for (int k = 0; k < 4; ++k) {
          int u = tets[v2t_[i]][k];
          if (u != v) scratch.push_back(u);
        }
      std::sort(scratch.begin(), scratch.end());
      scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
      counts[v] = static_cast<int>(scratch.size());
    }
    for (int v = 0; v < nv; ++v) v2v_off_[v + 1] = v2v_off_[v] + counts[v];
    v2v_.resize(v2v_off_[nv]);
    for (int v = 0; v < nv; ++v) {
      scratch.clear();
      for (int i = v2t_off_[v]; i < v2t_off_[v + 1]; ++i)
        for (int k = 0; k < 4; ++k) {
          int u = tets[v2t_[i]][k];
          if (u != v) scratch.push_back(u);
        }
      std::sort(scratch.begin(), scratch.end());
      scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
      std::copy(scratch.begin(), scratch.end(), v2v_.begin() + v2v_off_[v]);
    }
  }

  static constexpr int kFaceCorners[4][3] = {
      {1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

  void build_boundary() {
    // Enumerate faces as sorted 64-bit keys; faces seen once are boundary.
    struct Rec { std::uint64_t key; int tet; std::int8_t slot; };
    const std::uint64_t nv = vertices.size();
    std::vector<Rec> recs;
    recs.reserve(tets.size() * 4);
    for (int t = 0; t < tet_count(); ++t) {
      for (int s = 0; s < 4; ++s) {
        std::array<int, 3> f{tets[t][kFaceCorners[s][0]],
                             tets[t][kFaceCorners[s][1]],
                             tets[t][kFaceCorners[s][2]]};
        std::sort(f.begin(), f.end());
        std::uint64_t key =
            (static_cast<std::uint64_t>(f[0]) * nv + f[1]) * nv + f[2];
        recs.push_back({key, t, static_cast<std::int8_t>(s)});
      }
    }
    std::sort(recs.begin(), recs.end(), [](const Rec& a, const Rec& b) {
      if (a.key != b.key) return a.key < b.key;
      return a.tet < b.tet;
    });
    boundary_faces_.clear();
    for (std::size_t i = 0; i < recs.size();) {
      std::size_t j = i;
      while (j < recs.size() && recs[j].key == recs[i].key) ++j;
      if (j - i == 1) {
        const Rec& r = recs[i];
        boundary_faces_.push_back({tets[r.tet][kFaceCorners[r.slot][0]],
                                   tets[r.tet][kFaceCorners[r.slot][1]],
                                   tets[r.tet][kFaceCorners[r.slot][2]]});
      } else if (j - i > 2) {
        throw GeometryError("non-manifold face (shared by >2 tets)");
      }
      i = j;
    }
    boundary_tree_.build(vertices, boundary_faces_);
  }

  void build_bins() {
    bbox_lo_ = Vec3{1e300, 1e300, 1e300};
    bbox_hi_ = Vec3{-1e300, -1e300, -1e300};
    for (const auto& v : vertices) {
      bbox_lo_ = min(bbox_lo_, v);
      bbox_hi_ = max(bbox_hi_, v);
    }
    Vec3 ext = bbox_hi_ - bbox_lo_;
    double vol = std::max(ext.x * ext.y * ext.z, 1e-300);
    double target = std::cbrt(vol / std::max<std::size_t>(tets.size(), 1));
    for (int k = 0; k < 3; ++k) {
      int n = static_cast<int>(ext[k] / std::max(target, 1e-300)) + 1;
      bin_dims_[k] = std::clamp(n, 1, 256);
      bin_width_[k] = ext[k] > 0 ? ext[k] / bin_dims_[k] : 1.0;
    }
    const double pad = 1e-9 * (1.0 + ext.norm());
    auto cell_range = [&](const Vec3& lo, const Vec3& hi, int out[6]) {
      for (int k = 0; k < 3; ++k) {
        out[k] = std::clamp(
            static_cast<int>((lo[k] - pad - bbox_lo_[k]) / bin_width_[k]), 0,
            bin_dims_[k] - 1);
        out[3 + k] = std::clamp(
            static_cast<int>((hi[k] + pad - bbox_lo_[k]) / bin_width_[k]), 0,
            bin_dims_[k] - 1);
      }
    };
    const int ncell = bin_dims_[0] * bin_dims_[1] * bin_dims_[2];
    bin_off_.assign(ncell + 1, 0);
    for (int t = 0; t < tet_count(); ++t) {
      Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
      for (int k = 0; k < 4; ++k) {
        lo = min(lo, vertices[tets[t][k]]);
        hi = max(hi, vertices[tets[t][k]]);
      }
      int r[6];
      cell_range(lo, hi, r);
      for (int i = r[0]; i <= r[3]; ++i)
        for (int j = r[1]; j <= r[4]; ++j)
          for (int k = r[2]; k <= r[5]; ++k)
            bin_off_[cell_index(i, j, k) + 1]++;
    }
    for (int c = 0; c < ncell; ++c) bin_off_[c + 1] += bin_off_[c];
    bin_items_.resize(bin_off_[ncell]);
    std::vector<int> cursor(bin_off_.begin(), bin_off_.end() - 1);
    for (int t = 0; t < tet_count(); ++t) {
      Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
      for (int k = 0; k < 4; ++k) {
        lo = min(lo, vertices[tets[t][k]]);
        hi = max(hi, vertices[tets[t][k]]);
      }
      int r[6];
      cell_range(lo, hi, r);
      for (int i = r[0]; i <= r[3]; ++i)
        for (int j = r[1]; j <= r[4]; ++j)
          for (int k = r[2]; k <= r[5]; ++k)
            bin_items_[cursor[cell_index(i, j, k)]++] = t;
    }
    // tets are visited in ascending order above, so each cell list is sorted
  }

  int cell_index(int i, int j, int k) const {
    return (i * bin_dims_[1] + j) * bin_dims_[2] + k;
  }

  std::pair<const int*, const int*> bin_candidates(const Vec3& p) const {
    int c[3];
    for (int k = 0; k < 3; ++k) {
      c[k] = std::clamp(static_cast<int>((p[k] - bbox_lo_[k]) / bin_width_[k]),
                        0, bin_dims_[k] - 1);
    }
    int cell = cell_index(c[0], c[1], c[2]);
    return {bin_items_.data() + bin_off_[cell],
            bin_items_.data() + bin_off_[cell + 1]};
  }

  void build_surface_trees() {
    surface_trees_.clear();
    for (const auto& [name, tris] : surfaces) {
      for (const auto& t : tris)
        for (int k = 0; k < 3; ++k)
          if (t[k] < 0 || t[k] >= vertex_count())
            throw GeometryError("surface '" + name + "' vertex out of range");
      surface_trees_[name].build(vertices, tris);
    }
  }

  void compute_hash() {
    Fnv1a h;
    h.feed(static_cast<std::uint64_t>(vertices.size()));
    for (const auto& v : vertices) { h.feed(v.x); h.feed(v.y); h.feed(v.z); }
    h.feed(static_cast<std::uint64_t>(tets.size()));
    for (const auto& q : tets)
      for (int k = 0; k < 4; ++k) h.feed(q[k]);
    for (int l : region_labels) h.feed(l);
    content_hash_ = h.digest();
  }

  bool finalized_ = false;
  std::vector<double> volumes_;
  double total_volume_ = 0;
  std::vector<int> v2t_off_, v2t_, v2v_off_, v2v_;
  std::vector<std::array<int, 3>> boundary_faces_;
  TriangleBvh boundary_tree_;
  std::map<std::string, TriangleBvh> surface_trees_;
  Vec3 bbox_lo_, bbox_hi_;
  int bin_dims_[3] = {1, 1, 1};
  double bin_width_[3] = {1, 1, 1};
  std::vector<int> bin_off_, bin_items_;
  std::uint64_t content_hash_ = 0;

 public:
  Vec3 bbox_lo() const { return bbox_lo_; }
  Vec3 bbox_hi() const { return bbox_hi_; }
};

// Result of TetMesh::extract_region: a standalone mesh plus index maps in
// both directions between the extraction and its parent.
struct Submesh {
  TetMesh mesh;
  std::vector<int> vertex_to_parent;  // new -> old
  std::vector<int> parent_to_vertex;  // old -> new (-1 if absent)
  std::vector<int> tet_to_parent;     // new -> old
};

inline Submesh TetMesh::extract_region(int label) const {
  Submesh out;
  out.parent_to_vertex.assign(vertices.size(), -1);
  for (int t = 0; t < tet_count(); ++t) {
    if (region_labels[t] != label) continue;
    std::array<int, 4> q{};
    for (int k = 0; k < 4; ++k) {
      int v = tets[t][k];
      if (out.parent_to_vertex[v] < 0) {
        out.parent_to_vertex[v] = static_cast<int>(out.vertex_to_parent.size());
        out.vertex_to_parent.push_back(v);
        out.mesh.vertices.push_back(vertices[v]);
      }
      q[k] = out.parent_to_vertex[v];
    }
    out.mesh.tets.push_back(q);
    out.mesh.region_labels.push_back(label);
    out.tet_to_parent.push_back(t);
  }
  if (out.mesh.tets.empty())
    throw GeometryError("region label " + std::to_string(label) +
                        " has no tets");
  for (const auto& [name, tris] : surfaces) {
    std::vector<std::array<int, 3>> kept;
    for (const auto& t : tris) {
      int a = out.parent_to_vertex[t[0]], b = out.parent_to_vertex[t[1]],
          c = out.parent_to_vertex[t[2]];
      if (a >= 0 && b >= 0 && c >= 0) kept.push_back({a, b, c});
    }
    if (!kept.empty()) out.mesh.surfaces[name] = std::move(kept);
  }
  out.mesh.finalize();
  return out;
}

// ---------------------------------------------------------- VelocityField ---

// Per-element orthonormal frame (fiber / sheet / sheet-normal) plus
// conduction velocities along each axis.  Velocities may be uniform or given
// per element.  The anisotropic metric of element t is
//   M = vf^2 f f' + vs^2 s s' + vn^2 n n'
// and its exact inverse is assembled from the same frame with reciprocal
// squared speeds.
class VelocityField {
 public:
  std::vector<Vec3> fiber, sheet, normal;  // per tet
  double vf = 0.61, vs = 0.225, vn = 0.225;  // mm/ms
  std::vector<double> vf_e, vs_e, vn_e;      // optional per-element override

  static VelocityField isotropic(const TetMesh& mesh, double v) {
    VelocityField f;
    f.fiber.assign(mesh.tet_count(), Vec3{1, 0, 0});
    f.sheet.assign(mesh.tet_count(), Vec3{0, 1, 0});
    f.normal.assign(mesh.tet_count(), Vec3{0, 0, 1});
    f.vf = f.vs = f.vn = v;
    return f;
  }

  static VelocityField uniform_frame(const TetMesh& mesh, Vec3 f0, Vec3 s0,
                                     double vf, double vs, double vn) {
    VelocityField f;
    Vec3 fn = f0.normalized();
    Vec3 sn = (s0 - fn * fn.dot(s0)).normalized();
    f.fiber.assign(mesh.tet_count(), fn);
    f.sheet.assign(mesh.tet_count(), sn);
    f.normal.assign(mesh.tet_count(), fn.cross(sn));
    f.vf = vf; f.vs = vs; f.vn = vn;
    return f;
  }

  void validate(const TetMesh& mesh) const {
    std::size_t nt = mesh.tet_count();
    if (fiber.size() != nt || sheet.size() != nt || normal.size() != nt)
      throw GeometryError("velocity frame count does not match tet count");
    if (!(vf > 0 && vs > 0 && vn > 0))
      throw GeometryError("conduction velocities must be positive");
    for (std::size_t t = 0; t < nt; ++t) {
      const Vec3 &f = fiber[t], &s = sheet[t], &n = normal[t];
      double err = std::abs(f.norm() - 1) + std::abs(s.norm() - 1) +
                   std::abs(n.norm() - 1) + std::abs(f.dot(s)) +
                   std::abs(f.dot(n)) + std::abs(s.dot(n));
      if (err > 6e-10)
        throw GeometryError("non-orthonormal frame at tet " + std::to_string(t));
    }
    if (!vf_e.empty() && (vf_e.size() != nt || vs_e.size() != nt || vn_e.size() != nt))
      throw GeometryError("per-element velocity count does not match tet count");
  }

  double speed_f(int t) const { return vf_e.empty() ? vf : vf_e[t]; }
  double speed_s(int t) const { return vs_e.empty() ? vs : vs_e[t]; }
  double speed_n(int t) const { return vn_e.empty() ? vn : vn_e[t]; }

  // Squared-speed tensor M (mm^2/ms^2).
  SymMat3 tensor(int t) const {
    double a = speed_f(t), b = speed_s(t), c = speed_n(t);
    return SymMat3::outer(fiber[t]) * (a * a) +
           SymMat3::outer(sheet[t]) * (b * b) +
           SymMat3::outer(normal[t]) * (c * c);
  }

  // Exact inverse metric M^{-1} (ms^2/mm^2); travel time between points
  // x, y inside element t is sqrt((y-x)' M^{-1} (y-x)).
  SymMat3 tensor_inv(int t) const {
    double a = speed_f(t), b = speed_s(t), c = speed_n(t);
    return SymMat3::outer(fiber[t]) * (1.0 / (a * a)) +
           SymMat3::outer(sheet[t]) * (1.0 / (b * b)) +
           SymMat3::outer(normal[t]) * (1.0 / (c * c));
  }

  std::uint64_t content_hash() const {
    Fnv1a h;
    h.feed(vf); h.feed(vs); h.feed(vn);
    h.feed(static_cast<std::uint64_t>(fiber.size()));
    for (std::size_t t = 0; t < fiber.size(); ++t) {
      h.feed(fiber[t].x); h.feed(fiber[t].y); h.feed(fiber[t].z);
      h.feed(sheet[t].x); h.feed(sheet[t].y); h.feed(sheet[t].z);
    }
    for (double v : vf_e) h.feed(v);
    for (double v : vs_e) h.feed(v);
    for (double v : vn_e) h.feed(v);
    return h.digest();
  }
};

}  // namespace etwin
