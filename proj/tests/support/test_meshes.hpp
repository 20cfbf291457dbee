// Verification meshes for solver accuracy studies.
//
// radial_cube_mesh tiles the cube [0,L]^3 with tets graded radially around
// the corner vertex at the origin: K scaled copies of the three far faces
// (geometric radii), prisms between consecutive layers, cones from the apex
// to the innermost layer.  A front emitted at the origin crosses element
// boundaries nearly parallel to them, so the piecewise-linear face updates
// track the curved front tightly; uniform grids cap the achievable accuracy
// near a point source at a few percent regardless of resolution because the
// closest rings of faces always cut the front at a fixed angle.  Interior
// vertices get deterministic tangential jitter so mesh edges do not line up
// with rays from the apex and face minimizers land inside faces, not just on
// edges.  Every tet is emitted in its intended tiling orientation and must
// have positive volume, so the construction throws instead of producing a
// tangled (overlapping) mesh.
#pragma once
#include "etwin/etwin.hpp"

namespace etwin {

inline TetMesh radial_cube_mesh(double L, int n, int layers, double growth,
                                double jitter, std::uint64_t seed) {
  if (n < 2 || layers < 2) throw GeometryError("radial_cube_mesh: too small");
  TetMesh m;
  m.vertices.push_back({0, 0, 0});  // apex

  // far-surface grid: integer triples in [0..n]^3 with max == n
  std::vector<std::array<int, 3>> surf;
  std::map<std::array<int, 3>, int> sid;
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      for (int k = 0; k <= n; ++k)
        if (i == n || j == n || k == n) {
          sid[{i, j, k}] = static_cast<int>(surf.size());
          surf.push_back({i, j, k});
        }
  const int vs = static_cast<int>(surf.size());

  // layer radii as fractions of the full surface: t_k = growth^(k-layers)
  std::vector<double> t(layers + 1, 0.0);
  for (int k = 1; k <= layers; ++k)
    t[k] = std::pow(growth, static_cast<double>(k - layers));

  auto vid = [&](int k, int s) { return 1 + (k - 1) * vs + s; };
  for (int k = 1; k <= layers; ++k)
    for (int s = 0; s < vs; ++s) {
      Vec3 p{L * surf[s][0] / n, L * surf[s][1] / n, L * surf[s][2] / n};
      Vec3 q = p * t[k];
      bool wall = surf[s][0] == 0 || surf[s][1] == 0 || surf[s][2] == 0;
      if (!wall && k < layers && jitter > 0) {
        // tangential basis at direction p
        Vec3 d = p.normalized();
        Vec3 a = std::abs(d.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
        Vec3 u1 = d.cross(a).normalized();
        Vec3 u2 = d.cross(u1);
        std::uint64_t h = Rng::splitmix(seed ^ (std::uint64_t(k) << 32 ^ s));
        double z1 = (h >> 11) * 0x1.0p-53;
        double z2 = ((h * 0x9e3779b97f4a7c15ULL) >> 11) * 0x1.0p-53;
        double c = t[k] * L / n;  // local tangential spacing
        q += u1 * (jitter * c * (2 * z1 - 1)) + u2 * (jitter * c * (2 * z2 - 1));
      }
      m.vertices.push_back(q);
    }

  // surface triangulation: per far face, quads split along the diagonal
  // through the quad's smallest id; all triangles wound outward (away from
  // the apex) so prisms and cones below can rely on the orientation
  std::vector<std::array<int, 3>> tris;  // surface ids
  auto quad = [&](std::array<int, 3> p00, std::array<int, 3> p10,
                  std::array<int, 3> p11, std::array<int, 3> p01) {
    int v00 = sid[p00], v10 = sid[p10], v11 = sid[p11], v01 = sid[p01];
    if (std::min(v00, v11) < std::min(v10, v01)) {
      tris.push_back({v00, v10, v11});
      tris.push_back({v00, v11, v01});
    } else {
      tris.push_back({v10, v11, v01});
      tris.push_back({v10, v01, v00});
    }
  };
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      quad({n, a, b}, {n, a + 1, b}, {n, a + 1, b + 1}, {n, a, b + 1});
      // reversed: the same parameter order would wind inward on this face
      quad({a, n, b + 1}, {a + 1, n, b + 1}, {a + 1, n, b}, {a, n, b});
      quad({a, b, n}, {a + 1, b, n}, {a + 1, b + 1, n}, {a, b + 1, n});
    }

  auto add = [&](int a, int b, int c, int d) {
    Vec3 e1 = m.vertices[b] - m.vertices[a];
    Vec3 e2 = m.vertices[c] - m.vertices[a];
    Vec3 e3 = m.vertices[d] - m.vertices[a];
    double v6 = e1.cross(e2).dot(e3);
    if (!(v6 > 0))
      throw GeometryError("radial_cube_mesh: inverted tet (reduce jitter)");
    m.tets.push_back({a, b, c, d});
  };

  // apex cones: outward winding makes (apex, tri) positively oriented
  for (const auto& tr : tris) add(0, vid(1, tr[0]), vid(1, tr[1]), vid(1, tr[2]));

  // prisms between consecutive layers, split into 3 tets via the
  // smallest-global-id diagonal rule (consistent across neighbors)
  auto split_prism = [&](int b1, int b2, int b3, int u1, int u2, int u3) {
    int vmin = std::min({b1, b2, b3, u1, u2, u3});
    if (vmin == u1 || vmin == u2 || vmin == u3) {
      // mirror: swap decks and reverse both windings, which keeps the
      // bottom triangle wound toward the top
      int nb1 = u1, nb2 = u3, nb3 = u2;
      int nu1 = b1, nu2 = b3, nu3 = b2;
      b1 = nb1; b2 = nb2; b3 = nb3;
      u1 = nu1; u2 = nu2; u3 = nu3;
      vmin = std::min({b1, b2, b3});
    }
    while (b1 != vmin) {  // rotate the smallest id to the b1 slot
      int tb = b1; b1 = b2; b2 = b3; b3 = tb;
      int tu = u1; u1 = u2; u2 = u3; u3 = tu;
    }
    // quads touching b1 are cut through b1; the remaining quad
    // (b2,b3,u3,u2) is cut through its smallest id
    if (std::min(b2, u3) < std::min(b3, u2)) {
      add(b1, b2, b3, u3); add(b1, b2, u3, u2); add(b1, u1, u2, u3);
    } else {
      add(b1, b2, b3, u2); add(b1, b3, u3, u2); add(b1, u1, u2, u3);
    }
  };
  for (int k = 1; k < layers; ++k)
    for (const auto& tr : tris)
      split_prism(vid(k, tr[0]), vid(k, tr[1]), vid(k, tr[2]),
                  vid(k + 1, tr[0]), vid(k + 1, tr[1]), vid(k + 1, tr[2]));

  m.region_labels.assign(m.tets.size(), 0);
  m.finalize();
  return m;
}

}  // namespace etwin
