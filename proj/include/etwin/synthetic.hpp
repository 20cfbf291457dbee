// Synthetic desk-scale anatomy: a half-ellipsoid ventricular shell (with a
// rule-based transmural fiber rotation) embedded in a box torso, plus an
// ellipsoidal blood pool and optional lungs.  Meshes are built on a graded
// tensor-product grid (fine spacing across the ventricle, geometrically
// coarsening towards the torso boundary) split into tets with the Kuhn
// 6-tet template, which keeps the mesh conforming for free.
//
// Region labels: 0 torso, 1 ventricle, 2 blood, 3 lung.
// Named surfaces: "endo" (ventricle|blood interface), "epi" (remaining
// ventricle interface incl. the basal rim), "torso_skin" (outer box).
#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "etwin/mesh.hpp"

namespace etwin {

inline constexpr int kRegionTorso = 0;
inline constexpr int kRegionVentricle = 1;
inline constexpr int kRegionBlood = 2;
inline constexpr int kRegionLung = 3;

// ------------------------------------------------------------ grid meshes ---

// Plane positions for one axis: uniform spacing h_fine on [core_lo, core_hi],
// geometric growth (capped at h_max) out to [lo, hi].
inline std::vector<double> graded_axis(double lo, double hi, double core_lo,
                                       double core_hi, double h_fine,
                                       double h_max, double growth = 1.35) {
  if (!(hi > lo)) throw GeometryError("graded_axis: empty interval");
  core_lo = std::max(core_lo, lo);
  core_hi = std::min(core_hi, hi);
  if (!(core_hi > core_lo)) { core_lo = lo; core_hi = hi; }
  std::vector<double> planes;
  int nf = std::max(1, static_cast<int>(std::lround((core_hi - core_lo) / h_fine)));
  for (int i = 0; i <= nf; ++i)
    planes.push_back(core_lo + (core_hi - core_lo) * i / nf);
  double h = h_fine;
  double pos = core_lo;
  while (pos - lo > 1e-12) {
    h = std::min(h * growth, h_max);
    if (pos - lo <= 1.6 * h) { planes.push_back(lo); break; }
    pos -= h;
    planes.push_back(pos);
  }
  h = h_fine;
  pos = core_hi;
  while (hi - pos > 1e-12) {
    h = std::min(h * growth, h_max);
    if (hi - pos <= 1.6 * h) { planes.push_back(hi); break; }
    pos += h;
    planes.push_back(pos);
  }
  std::sort(planes.begin(), planes.end());
  planes.erase(std::unique(planes.begin(), planes.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               planes.end());
  return planes;
}

inline std::vector<double> uniform_axis(double lo, double hi, int n) {
  if (n < 1) throw GeometryError("uniform_axis: need at least one cell");
  std::vector<double> p(n + 1);
  for (int i = 0; i <= n; ++i) p[i] = lo + (hi - lo) * i / n;
  return p;
}

// Tensor-product grid split into 6 tets per cell (Kuhn template around the
// main diagonal; conforming across cells).  Not finalized; callers label
// regions / attach surfaces first.
inline TetMesh tensor_mesh(const std::vector<double>& xs,
                           const std::vector<double>& ys,
                           const std::vector<double>& zs) {
  const int nx = static_cast<int>(xs.size()), ny = static_cast<int>(ys.size()),
            nz = static_cast<int>(zs.size());
  if (nx < 2 || ny < 2 || nz < 2) throw GeometryError("tensor_mesh: need >=2 planes per axis");
  TetMesh m;
  m.vertices.reserve(static_cast<std::size_t>(nx) * ny * nz);
  auto vid = [&](int i, int j, int k) { return (i * ny + j) * nz + k; };
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k)
        m.vertices.push_back({xs[i], ys[j], zs[k]});

  // Six tets per cell, one per axis permutation (all cells share the same
  // template, so every cell contributes the same main-diagonal direction).
  // Odd permutations need a swap to keep positive orientation.
  static constexpr int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  static constexpr bool odd[6] = {false, true, true, false, false, true};
  m.tets.reserve(static_cast<std::size_t>(nx - 1) * (ny - 1) * (nz - 1) * 6);
  for (int i = 0; i + 1 < nx; ++i)
    for (int j = 0; j + 1 < ny; ++j)
      for (int k = 0; k + 1 < nz; ++k) {
        int base[3] = {i, j, k};
        for (int p = 0; p < 6; ++p) {
          int c[3] = {base[0], base[1], base[2]};
          int v0 = vid(c[0], c[1], c[2]);
          c[perms[p][0]]++;
          int v1 = vid(c[0], c[1], c[2]);
          c[perms[p][1]]++;
          int v2 = vid(c[0], c[1], c[2]);
          c[perms[p][2]]++;
          int v3 = vid(c[0], c[1], c[2]);
          if (odd[p]) std::swap(v1, v2);
          m.tets.push_back({v0, v1, v2, v3});
        }
      }
  return m;
}

namespace detail {

// One record per (face, incident tet); sorted so equal faces are adjacent.
struct FaceRec {
  std::uint64_t key;
  int tet;
  std::int8_t slot;
};

inline constexpr int kFaceCornersOf[4][3] = {
    {1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}};

inline std::array<int, 3> face_vertices(const TetMesh& m, int tet, int slot) {
  return {m.tets[tet][kFaceCornersOf[slot][0]],
          m.tets[tet][kFaceCornersOf[slot][1]],
          m.tets[tet][kFaceCornersOf[slot][2]]};
}

inline std::vector<FaceRec> face_scan(const TetMesh& m) {
  const std::uint64_t nv = m.vertices.size();
  std::vector<FaceRec> recs;
  recs.reserve(m.tets.size() * 4);
  for (int t = 0; t < static_cast<int>(m.tets.size()); ++t)
    for (int s = 0; s < 4; ++s) {
      auto f = face_vertices(m, t, s);
      std::sort(f.begin(), f.end());
      std::uint64_t key = (static_cast<std::uint64_t>(f[0]) * nv + f[1]) * nv + f[2];
      recs.push_back({key, t, static_cast<std::int8_t>(s)});
    }
  std::sort(recs.begin(), recs.end(), [](const FaceRec& a, const FaceRec& b) {
    if (a.key != b.key) return a.key < b.key;
    return a.tet < b.tet;
  });
  return recs;
}

}  // namespace detail

// Axis-aligned box, uniform resolution, finalized, single region, with the
// box boundary registered as surface "boundary".
inline TetMesh box_mesh(Vec3 lower, Vec3 upper, int nx, int ny, int nz) {
  TetMesh m = tensor_mesh(uniform_axis(lower.x, upper.x, nx),
                          uniform_axis(lower.y, upper.y, ny),
                          uniform_axis(lower.z, upper.z, nz));
  m.region_labels.assign(m.tets.size(), 0);
  auto recs = detail::face_scan(m);
  std::vector<std::array<int, 3>> boundary;
  for (std::size_t i = 0; i < recs.size();) {
    std::size_t j = i;
    while (j < recs.size() && recs[j].key == recs[i].key) ++j;
    if (j - i == 1)
      boundary.push_back(detail::face_vertices(m, recs[i].tet, recs[i].slot));
    i = j;
  }
  m.surfaces["boundary"] = std::move(boundary);
  m.finalize();
  return m;
}

inline TetMesh unit_cube_mesh(int n) {
  return box_mesh({0, 0, 0}, {1, 1, 1}, n, n, n);
}

// ----------------------------------------------------------------- anatomy ---

struct AnatomyParams {
  // Ventricle: half-ellipsoid shell, base plane z = 0, apex at z = -rz.
  double rx = 22, ry = 22, rz = 30;  // outer semi-axes (mm)
  double wall = 6;                   // wall thickness (mm)
  // Torso box.
  Vec3 torso_lo{-60, -60, -75};
  Vec3 torso_hi{60, 60, 45};
  // Resolutions.
  double h_ventricle = 1.25;  // edge length in the cardiac region (mm)
  double h_torso = 8.0;       // cap for the coarse region (mm)
  double grading = 1.35;      // geometric growth factor
  // Fibers: transmural rotation endo -> epi (degrees).
  double fiber_angle_endo = -60.0;
  double fiber_angle_epi = 60.0;
  // Lungs (two ellipsoids), optional.
  bool lungs = true;
  Vec3 lung_semi{11, 22, 26};
  Vec3 lung_center_left{36, 4, -18};
  Vec3 lung_center_right{-36, 4, -18};

  void validate() const {
    if (!(rx > 0 && ry > 0 && rz > 0))
      throw GeometryError("anatomy: ventricle semi-axes must be positive");
    if (!(wall > 0 && wall < rx && wall < ry && wall < rz))
      throw GeometryError("anatomy: wall thickness must be in (0, min semi-axis)");
    if (!(h_ventricle > 0 && h_torso >= h_ventricle))
      throw GeometryError("anatomy: resolutions must satisfy 0 < h_ventricle <= h_torso");
    if (!(torso_hi.x > torso_lo.x && torso_hi.y > torso_lo.y && torso_hi.z > torso_lo.z))
      throw GeometryError("anatomy: empty torso box");
    if (rx >= torso_hi.x || -rx <= torso_lo.x || ry >= torso_hi.y ||
        -ry <= torso_lo.y || -rz <= torso_lo.z || torso_hi.z <= 0)
      throw GeometryError("anatomy: ventricle does not fit inside torso box");
  }

  double inner(double r) const { return r - wall; }

  // Analytic half-ellipsoid shell volume (for cross-checks).
  double shell_volume() const {
    double vo = 2.0 / 3.0 * 3.14159265358979323846 * rx * ry * rz;
    double vi = 2.0 / 3.0 * 3.14159265358979323846 * inner(rx) * inner(ry) * inner(rz);
    return vo - vi;
  }
};

struct Anatomy {
  TetMesh mesh;
  VelocityField velocity;  // frames for all tets; defaults vf/vs/vn preset
  AnatomyParams params;
};

namespace detail {

inline double ellipsoid_level(const Vec3& p, double a, double b, double c) {
  double x = p.x / a, y = p.y / b, z = p.z / c;
  return std::sqrt(x * x + y * y + z * z);
}

inline bool in_lung(const Vec3& p, const AnatomyParams& prm) {
  if (!prm.lungs) return false;
  for (const Vec3& c : {prm.lung_center_left, prm.lung_center_right}) {
    Vec3 d = p - c;
    if (ellipsoid_level(d, prm.lung_semi.x, prm.lung_semi.y, prm.lung_semi.z) <= 1.0)
      return true;
  }
  return false;
}

inline int classify(const Vec3& p, const AnatomyParams& prm) {
  if (p.z <= 0 &&
      ellipsoid_level(p, prm.rx, prm.ry, prm.rz) <= 1.0) {
    if (ellipsoid_level(p, prm.inner(prm.rx), prm.inner(prm.ry),
                        prm.inner(prm.rz)) < 1.0)
      return kRegionBlood;
    return kRegionVentricle;
  }
  if (in_lung(p, prm)) return kRegionLung;
  return kRegionTorso;
}

// Orthonormal fiber frame at a ventricular point: fiber rotates linearly in
// the local (circumferential, apico-basal) tangent plane from
// fiber_angle_endo at the endocardium to fiber_angle_epi at the epicardium;
// the sheet axis is transmural.
inline void fiber_frame(const Vec3& p, const AnatomyParams& prm, Vec3& f,
                        Vec3& s, Vec3& n) {
  double lo = ellipsoid_level(p, prm.rx, prm.ry, prm.rz);
  double li = ellipsoid_level(p, prm.inner(prm.rx), prm.inner(prm.ry),
                              prm.inner(prm.rz));
  double t_endo = li > 0 ? 1.0 / li : 0.0;   // radial scale to reach endo
  double t_epi = lo > 0 ? 1.0 / lo : 1.0;    // radial scale to reach epi
  double rho = 0.5;
  if (t_epi > t_endo)
    rho = std::clamp((1.0 - t_endo) / (t_epi - t_endo), 0.0, 1.0);

  Vec3 grad{p.x / (prm.rx * prm.rx), p.y / (prm.ry * prm.ry),
            p.z / (prm.rz * prm.rz)};
  Vec3 r = grad.norm() > 0 ? grad.normalized() : Vec3{0, 0, -1};
  Vec3 up{0, 0, 1};
  Vec3 ab = up - r * r.dot(up);
  if (ab.norm() < 1e-8) {  // apex pole: pick any tangent direction
    Vec3 ex{1, 0, 0};
    ab = ex - r * r.dot(ex);
  }
  ab = ab.normalized();
  Vec3 circ = ab.cross(r);  // unit, tangent, circumferential

  double deg = prm.fiber_angle_endo +
               (prm.fiber_angle_epi - prm.fiber_angle_endo) * rho;
  double a = deg * 3.14159265358979323846 / 180.0;
  f = circ * std::cos(a) + ab * std::sin(a);
  s = r;
  n = f.cross(s);
  // polish orthonormality
  f = f.normalized();
  s = (s - f * f.dot(s)).normalized();
  n = f.cross(s);
}

}  // namespace detail

inline Anatomy build_anatomy(const AnatomyParams& prm) {
  prm.validate();
  double margin = 2.0 * prm.h_ventricle;
  auto xs = graded_axis(prm.torso_lo.x, prm.torso_hi.x, -prm.rx - margin,
                        prm.rx + margin, prm.h_ventricle, prm.h_torso, prm.grading);
  auto ys = graded_axis(prm.torso_lo.y, prm.torso_hi.y, -prm.ry - margin,
                        prm.ry + margin, prm.h_ventricle, prm.h_torso, prm.grading);
  auto zs = graded_axis(prm.torso_lo.z, prm.torso_hi.z, -prm.rz - margin,
                        margin, prm.h_ventricle, prm.h_torso, prm.grading);

  Anatomy out;
  out.params = prm;
  out.mesh = tensor_mesh(xs, ys, zs);
  TetMesh& m = out.mesh;

  const int nt = m.tet_count();
  m.region_labels.resize(nt);
  for (int t = 0; t < nt; ++t) {
    const auto& q = m.tets[t];
    Vec3 c = (m.vertices[q[0]] + m.vertices[q[1]] + m.vertices[q[2]] +
              m.vertices[q[3]]) * 0.25;
    m.region_labels[t] = detail::classify(c, prm);
  }

  // Interface surfaces via shared-face matching.
  auto recs = detail::face_scan(m);
  std::vector<std::array<int, 3>> endo, epi, skin;
  auto face_of = [&](const detail::FaceRec& r) {
    return detail::face_vertices(m, r.tet, r.slot);
  };
  for (std::size_t i = 0; i < recs.size();) {
    std::size_t j = i;
    while (j < recs.size() && recs[j].key == recs[i].key) ++j;
    if (j - i == 1) {
      skin.push_back(face_of(recs[i]));  // mesh boundary == box skin
    } else {
      int la = m.region_labels[recs[i].tet], lb = m.region_labels[recs[i + 1].tet];
      if (la != lb) {
        // orient outward from the ventricle when it participates
        const detail::FaceRec& vrec =
            (la == kRegionVentricle) ? recs[i] : recs[i + 1];
        int other = (la == kRegionVentricle) ? lb : la;
        if (la == kRegionVentricle || lb == kRegionVentricle) {
          if (other == kRegionBlood) endo.push_back(face_of(vrec));
          else epi.push_back(face_of(vrec));
        }
      }
    }
    i = j;
  }
  if (endo.empty() || epi.empty())
    throw GeometryError("anatomy: ventricle surfaces came out empty; "
                        "check radii vs. resolution");
  m.surfaces["endo"] = std::move(endo);
  m.surfaces["epi"] = std::move(epi);
  m.surfaces["torso_skin"] = std::move(skin);
  m.finalize();

  // Fiber frames (identity outside the ventricle).
  VelocityField& vel = out.velocity;
  vel.fiber.assign(nt, Vec3{1, 0, 0});
  vel.sheet.assign(nt, Vec3{0, 1, 0});
  vel.normal.assign(nt, Vec3{0, 0, 1});
  for (int t = 0; t < nt; ++t) {
    if (m.region_labels[t] != kRegionVentricle) continue;
    Vec3 c = m.tet_centroid(t);
    detail::fiber_frame(c, prm, vel.fiber[t], vel.sheet[t], vel.normal[t]);
  }
  return out;
}

}  // namespace etwin
