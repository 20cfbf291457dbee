// Tetrahedral mesh container: point location, surface queries, sampling,
// velocity tensors, and region extraction.

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "etwin/mesh.hpp"
#include "etwin/rng.hpp"
#include "etwin/synthetic.hpp"

using namespace etwin;

namespace {

// Slab mesh with handmade named surfaces for the surface-query tests.
TetMesh slab_with_surfaces() {
  TetMesh base = box_mesh({0, 0, 0}, {1, 1, 0.25}, 4, 4, 1);
  TetMesh m;
  m.vertices = base.vertices;
  m.tets = base.tets;
  std::vector<std::array<int, 3>> bottom;
  for (const auto& tr : base.boundary_faces()) {
    bool on_floor = true;
    for (int k = 0; k < 3; ++k)
      if (base.vertices[tr[k]].z != 0.0) on_floor = false;
    if (on_floor) bottom.push_back(tr);
  }
  m.surfaces["bottom"] = bottom;
  // single-triangle and 9:1-pair surfaces for the sampling statistics
  m.surfaces["one_tri"] = {bottom[0]};
  m.finalize();
  return m;
}

}  // namespace

TEST_CASE("unit cube volume is exact") {
  TetMesh m = unit_cube_mesh(4);
  REQUIRE(m.total_volume() == Catch::Approx(1.0).epsilon(1e-9));
  double acc = 0;
  for (int t = 0; t < m.tet_count(); ++t) acc += m.tet_volume(t);
  REQUIRE(acc == Catch::Approx(m.total_volume()).epsilon(1e-12));
  REQUIRE(m.surface_area("boundary") == Catch::Approx(6.0).epsilon(1e-9));
}

TEST_CASE("locate_point at a mesh vertex returns a unit barycentric corner") {
  TetMesh m = unit_cube_mesh(3);
  for (int v : {0, 7, m.vertex_count() - 1}) {
    LocateResult loc = m.locate_point(m.vertices[v]);
    REQUIRE(loc.inside);
    // the winning tet contains the vertex, with weight 1 on it
    int corner = -1;
    for (int k = 0; k < 4; ++k)
      if (m.tets[loc.tet][k] == v) corner = k;
    REQUIRE(corner >= 0);
    REQUIRE(loc.bary[corner] == Catch::Approx(1.0).margin(1e-12));
    for (int k = 0; k < 4; ++k)
      if (k != corner) REQUIRE(loc.bary[k] == Catch::Approx(0.0).margin(1e-12));
    // lowest-index tie-break: no containing tet has a smaller index
    for (int t = 0; t < loc.tet; ++t) {
      auto b = m.barycentric(t, m.vertices[v]);
      REQUIRE(*std::min_element(b.begin(), b.end()) < kInsideBaryTol);
    }
  }
}

TEST_CASE("locate_point at a tet centroid recovers that tet") {
  TetMesh m = unit_cube_mesh(3);
  for (int t : {0, 5, m.tet_count() / 2, m.tet_count() - 1}) {
    LocateResult loc = m.locate_point(m.tet_centroid(t));
    REQUIRE(loc.inside);
    REQUIRE(loc.tet == t);
    for (int k = 0; k < 4; ++k)
      REQUIRE(loc.bary[k] == Catch::Approx(0.25).margin(1e-12));
  }
}

TEST_CASE("locate_point outside reports the nearest boundary point") {
  TetMesh m = unit_cube_mesh(4);
  LocateResult loc = m.locate_point({0.5, 0.5, 2.0});
  REQUIRE_FALSE(loc.inside);
  REQUIRE(loc.distance == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(loc.nearest.z == Catch::Approx(1.0).margin(1e-12));

  // brute-force oracle over every boundary triangle
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Vec3 p{rng.uniform(-1, 2), rng.uniform(-1, 2), rng.uniform(1.0001, 3)};
    LocateResult out = m.locate_point(p);
    REQUIRE_FALSE(out.inside);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& tr : m.boundary_faces()) {
      Vec3 c = closest_point_on_triangle(p, m.vertices[tr[0]],
                                         m.vertices[tr[1]], m.vertices[tr[2]]);
      best = std::min(best, (p - c).norm());
    }
    REQUIRE(out.distance == Catch::Approx(best).margin(1e-9));
  }
}

TEST_CASE("barycentric inside-tolerance admits points on the boundary skin") {
  TetMesh m = unit_cube_mesh(4);
  REQUIRE(m.locate_point({0.5, 0.5, -1e-10}).inside);
  LocateResult out = m.locate_point({0.5, 0.5, -1e-3});
  REQUIRE_FALSE(out.inside);
  REQUIRE(out.distance == Catch::Approx(1e-3).epsilon(1e-6));
}

TEST_CASE("surface_distance to a floor triangulation is the height") {
  TetMesh m = slab_with_surfaces();
  REQUIRE(m.surface_distance({0.4, 0.6, 0.2}, "bottom") ==
          Catch::Approx(0.2).margin(1e-12));
  // point on the surface
  REQUIRE(m.surface_distance({0.3, 0.3, 0.0}, "bottom") ==
          Catch::Approx(0.0).margin(1e-12));
  REQUIRE_THROWS_AS(m.surface_distance({0, 0, 0}, "no_such"), GeometryError);
}

TEST_CASE("surface_distance equals the per-triangle brute force") {
  TetMesh m = unit_cube_mesh(4);  // boundary has 192 triangles
  const auto& tris = m.surface("boundary");
  REQUIRE(tris.size() >= 100);
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    Vec3 p{rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5),
           rng.uniform(-0.5, 1.5)};
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& tr : tris) {
      Vec3 c = closest_point_on_triangle(p, m.vertices[tr[0]],
                                         m.vertices[tr[1]], m.vertices[tr[2]]);
      brute = std::min(brute, (p - c).norm());
    }
    REQUIRE(m.surface_distance(p, "boundary") ==
            Catch::Approx(brute).margin(1e-9));
  }
}

TEST_CASE("surface sampling is area-uniform") {
  TetMesh m = slab_with_surfaces();

  SECTION("single triangle: empirical centroid converges") {
    const auto& tr = m.surface("one_tri")[0];
    Vec3 a = m.vertices[tr[0]], b = m.vertices[tr[1]], c = m.vertices[tr[2]];
    Vec3 centroid = (a + b + c) / 3.0;
    double edge = std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
    auto pts = m.sample_surface_uniform("one_tri", 10000, 5);
    Vec3 mean{};
    for (const auto& p : pts) mean += p;
    mean = mean / static_cast<double>(pts.size());
    REQUIRE((mean - centroid).norm() < 0.02 * edge);
  }

  SECTION("two triangles with 9:1 area split in proportion") {
    // big triangle (legs 0.9) and small one (legs 0.3): area ratio 9:1
    TetMesh t2;
    t2.vertices = {{0, 0, 0},   {0.9, 0, 0}, {0, 0.9, 0},
                   {2, 0, 0},   {2.3, 0, 0}, {2, 0.3, 0},
                   {0, 0, 1},   {2, 0, 1}};
    t2.tets = {{0, 1, 2, 6}, {3, 4, 5, 7}};
    t2.surfaces["pair"] = {{0, 1, 2}, {3, 4, 5}};
    t2.finalize();
    const int n = 10000;
    auto pts = t2.sample_surface_uniform("pair", n, 11);
    int big = 0;
    for (const auto& p : pts)
      if (p.x < 1.5) ++big;
    double mean = 0.9 * n, sd = std::sqrt(n * 0.9 * 0.1);
    REQUIRE(std::abs(big - mean) < 3 * sd);
  }

  SECTION("sampling is deterministic and prefix-stable") {
    auto a = m.sample_surface_uniform("bottom", 50, 123);
    auto b = m.sample_surface_uniform("bottom", 50, 123);
    auto c = m.sample_surface_uniform("bottom", 10, 123);
    for (int i = 0; i < 50; ++i) {
      REQUIRE(a[i].x == b[i].x);
      REQUIRE(a[i].y == b[i].y);
      REQUIRE(a[i].z == b[i].z);
    }
    for (int i = 0; i < 10; ++i) REQUIRE(a[i].x == c[i].x);
    auto d = m.sample_surface_uniform("bottom", 1, 124);
    auto e = m.sample_surface_uniform("bottom", 1, 124);
    REQUIRE(d[0].x == e[0].x);
  }
}

TEST_CASE("velocity tensors reproduce the frame algebra") {
  TetMesh m = unit_cube_mesh(2);

  SECTION("unit speeds give the identity") {
    VelocityField v = VelocityField::isotropic(m, 1.0);
    SymMat3 t = v.tensor(0);
    REQUIRE(t.xx == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(t.yy == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(t.zz == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(t.xy == Catch::Approx(0.0).margin(1e-15));
  }

  SECTION("axis-aligned anisotropy gives the diagonal of squared speeds") {
    VelocityField v =
        VelocityField::uniform_frame(m, {1, 0, 0}, {0, 1, 0}, 0.61, 0.225, 0.225);
    SymMat3 t = v.tensor(0);
    REQUIRE(t.xx == Catch::Approx(0.3721).margin(1e-15));
    REQUIRE(t.yy == Catch::Approx(0.050625).margin(1e-15));
    REQUIRE(t.zz == Catch::Approx(0.050625).margin(1e-15));
    REQUIRE(t.xy == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(t.xz == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(t.yz == Catch::Approx(0.0).margin(1e-15));
  }

  SECTION("rotating the frame conjugates the tensor") {
    Vec3 f = Vec3{1, 2, 2}.normalized();
    Vec3 s0{0, 1, -0.3};
    VelocityField v = VelocityField::uniform_frame(m, f, s0, 0.61, 0.225, 0.225);
    Vec3 s = v.sheet[0], n = v.normal[0];
    // R has columns (f, s, n); M' = R diag(vf^2, vs^2, vn^2) R'
    SymMat3 expect = SymMat3::outer(f) * (0.61 * 0.61) +
                     SymMat3::outer(s) * (0.225 * 0.225) +
                     SymMat3::outer(n) * (0.225 * 0.225);
    SymMat3 got = v.tensor(0);
    for (double d : {got.xx - expect.xx, got.xy - expect.xy,
                     got.xz - expect.xz, got.yy - expect.yy,
                     got.yz - expect.yz, got.zz - expect.zz})
      REQUIRE(std::abs(d) < 1e-12);
  }

  SECTION("tensor_inv is the exact inverse") {
    Vec3 f = Vec3{1, -1, 0.5}.normalized();
    VelocityField v =
        VelocityField::uniform_frame(m, f, {0, 0, 1}, 0.61, 0.225, 0.31);
    SymMat3 a = v.tensor(0), b = v.tensor_inv(0);
    for (int k = 0; k < 3; ++k) {
      Vec3 e{};
      e[k] = 1;
      Vec3 r = a.apply(b.apply(e));
      for (int c = 0; c < 3; ++c)
        REQUIRE(r[c] == Catch::Approx(e[c]).margin(1e-12));
    }
  }

  SECTION("non-orthonormal frames are rejected") {
    VelocityField v = VelocityField::isotropic(m, 1.0);
    v.fiber[0] = {1, 0.1, 0};  // not unit, not orthogonal to sheet
    REQUIRE_THROWS_AS(v.validate(m), GeometryError);
  }
}

TEST_CASE("vertex adjacency inverts incidence") {
  TetMesh m = unit_cube_mesh(3);
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    int v = static_cast<int>(rng.index(m.vertex_count()));
    auto [tb, te] = m.vertex_tets(v);
    int brute = 0;
    for (int t = 0; t < m.tet_count(); ++t)
      for (int k = 0; k < 4; ++k)
        if (m.tets[t][k] == v) ++brute;
    REQUIRE(static_cast<int>(te - tb) == brute);
    for (const int* t = tb; t != te; ++t) {
      bool has = false;
      for (int k = 0; k < 4; ++k)
        if (m.tets[*t][k] == v) has = true;
      REQUIRE(has);
    }
  }
}

TEST_CASE("lumped vertex volumes partition the mesh volume") {
  TetMesh m = unit_cube_mesh(3);
  auto lv = m.lumped_vertex_volumes();
  double acc = 0;
  for (double v : lv) acc += v;
  REQUIRE(acc == Catch::Approx(m.total_volume()).epsilon(1e-12));
}

TEST_CASE("region extraction keeps geometry, labels, and surfaces consistent") {
  TetMesh m0 = box_mesh({0, 0, 0}, {2, 1, 1}, 4, 2, 2);
  TetMesh m;
  m.vertices = m0.vertices;
  m.tets = m0.tets;
  m.region_labels.resize(m.tets.size());
  for (std::size_t t = 0; t < m.tets.size(); ++t) {
    Vec3 c = (m.vertices[m.tets[t][0]] + m.vertices[m.tets[t][1]] +
              m.vertices[m.tets[t][2]] + m.vertices[m.tets[t][3]]) / 4.0;
    m.region_labels[t] = c.x < 1.0 ? 1 : 0;
  }
  m.surfaces["boundary"] = m0.boundary_faces();
  m.finalize();

  Submesh sub = m.extract_region(1);
  REQUIRE(sub.mesh.finalized());
  REQUIRE(sub.mesh.total_volume() == Catch::Approx(1.0).epsilon(1e-9));
  // parent maps are mutually inverse
  for (std::size_t v = 0; v < sub.vertex_to_parent.size(); ++v)
    REQUIRE(sub.parent_to_vertex[sub.vertex_to_parent[v]] ==
            static_cast<int>(v));
  // extracted tets reference the same points
  for (std::size_t t = 0; t < sub.mesh.tets.size(); ++t) {
    int pt = sub.tet_to_parent[t];
    for (int k = 0; k < 4; ++k) {
      Vec3 a = sub.mesh.vertices[sub.mesh.tets[t][k]];
      Vec3 b = m.vertices[m.tets[pt][k]];
      REQUIRE((a - b).norm() == 0.0);
    }
  }
  REQUIRE_THROWS_AS(m.extract_region(99), GeometryError);
}

TEST_CASE("finalize validates orientation and manifoldness") {
  SECTION("negatively oriented tet") {
    TetMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    m.tets = {{0, 2, 1, 3}};  // swapped -> negative volume
    REQUIRE_THROWS_AS(m.finalize(), GeometryError);
  }
  SECTION("three tets sharing one face") {
    TetMesh m;
    m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0},
                  {0.3, 0.3, 1}, {0.3, 0.3, -1}, {0.5, 0.5, 2}};
    m.tets = {{0, 1, 2, 3}, {0, 2, 1, 4}, {0, 1, 2, 5}};
    REQUIRE_THROWS_AS(m.finalize(), GeometryError);
  }
  SECTION("empty mesh") {
    TetMesh m;
    REQUIRE_THROWS_AS(m.finalize(), GeometryError);
  }
}

TEST_CASE("content hash tracks geometry changes") {
  TetMesh a = unit_cube_mesh(2);
  TetMesh b = unit_cube_mesh(2);
  REQUIRE(a.content_hash() == b.content_hash());
  TetMesh c0 = unit_cube_mesh(2);
  TetMesh c;
  c.vertices = c0.vertices;
  c.vertices[0].x += 1e-9;
  c.tets = c0.tets;
  c.finalize();
  REQUIRE(a.content_hash() != c.content_hash());
}
