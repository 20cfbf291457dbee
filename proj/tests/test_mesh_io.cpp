// Mesh file round trips and VTK export.

#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>

#include "etwin/mesh_io.hpp"
#include "etwin/synthetic.hpp"
#include "support/temp_dir.hpp"

using namespace etwin;
using etwin_test::TempDir;

namespace {

Anatomy tiny_anatomy() {
  AnatomyParams p;
  p.rx = p.ry = 15;
  p.rz = 20;
  p.wall = 5;
  p.torso_lo = {-40, -40, -50};
  p.torso_hi = {40, 40, 30};
  p.h_ventricle = 3.0;
  p.h_torso = 12;
  p.lungs = false;
  return build_anatomy(p);
}

}  // namespace

TEST_CASE("mesh writes and reads back bit-identically") {
  Anatomy a = tiny_anatomy();
  TempDir tmp("meshio");
  std::string path = tmp.file("anatomy.mesh");
  write_mesh(path, a.mesh, &a.velocity);

  MeshFile mf = read_mesh(path);
  REQUIRE(mf.mesh.finalized());
  REQUIRE(mf.has_fibers);
  REQUIRE(mf.mesh.vertex_count() == a.mesh.vertex_count());
  REQUIRE(mf.mesh.tet_count() == a.mesh.tet_count());
  REQUIRE(mf.mesh.content_hash() == a.mesh.content_hash());
  REQUIRE(mf.mesh.region_labels == a.mesh.region_labels);
  REQUIRE(mf.mesh.surfaces.size() == a.mesh.surfaces.size());
  for (const auto& [name, tris] : a.mesh.surfaces) {
    REQUIRE(mf.mesh.surface(name).size() == tris.size());
    REQUIRE(mf.mesh.surface(name) == tris);
  }
  for (int t = 0; t < a.mesh.tet_count(); ++t) {
    REQUIRE((mf.velocity.fiber[t] - a.velocity.fiber[t]).norm() == 0.0);
    REQUIRE((mf.velocity.sheet[t] - a.velocity.sheet[t]).norm() == 0.0);
  }
  // frames read from file pass orthonormality validation
  mf.velocity.validate(mf.mesh);

  // a second write of the loaded mesh is byte-identical to the first file
  std::string path2 = tmp.file("anatomy2.mesh");
  write_mesh(path2, mf.mesh, &mf.velocity);
  std::ifstream f1(path), f2(path2);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  REQUIRE(s1.str() == s2.str());
}

TEST_CASE("mesh without fibers round-trips too") {
  TetMesh m = unit_cube_mesh(2);
  TempDir tmp("meshio");
  std::string path = tmp.file("cube.mesh");
  write_mesh(path, m);
  MeshFile mf = read_mesh(path);
  REQUIRE_FALSE(mf.has_fibers);
  REQUIRE(mf.mesh.content_hash() == m.content_hash());
}

TEST_CASE("malformed mesh files are rejected") {
  TempDir tmp("meshio");
  std::string path = tmp.file("bad.mesh");
  {
    std::ofstream f(path);
    f << "#vertices\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n#tets\n0 1 2\n";  // short row
  }
  REQUIRE_THROWS_AS(read_mesh(path), IoError);
  REQUIRE_THROWS_AS(read_mesh(tmp.file("missing.mesh")), IoError);
}

TEST_CASE("VTK export contains the expected counts") {
  TetMesh m = unit_cube_mesh(2);
  TempDir tmp("meshio");
  std::string path = tmp.file("cube.vtk");
  std::vector<double> tau(m.vertex_count());
  for (int v = 0; v < m.vertex_count(); ++v) tau[v] = v * 0.5;
  write_vtk(path, m, {{"tau_ms", tau}}, {});

  std::ifstream f(path);
  REQUIRE(f.good());
  std::string text((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  REQUIRE(text.find("# vtk DataFile") != std::string::npos);
  REQUIRE(text.find("POINTS " + std::to_string(m.vertex_count())) !=
          std::string::npos);
  REQUIRE(text.find("CELLS " + std::to_string(m.tet_count())) !=
          std::string::npos);
  REQUIRE(text.find("tau_ms") != std::string::npos);
}
