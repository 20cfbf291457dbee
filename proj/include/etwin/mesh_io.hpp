// Mesh serialization.
//
// Native ASCII format, section-based:
//   #vertices            x y z               (one vertex per line)
//   #tets                i j k l label       (zero-based vertex ids)
//   #fibers              fx fy fz sx sy sz   (per tet; optional section)
//   #surface <name>      i j k               (one triangle per line)
//
// Plus a write-only legacy-ASCII VTK exporter (unstructured grid) for
// visual inspection in ParaView & friends.
#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/mesh.hpp"

namespace etwin {

struct MeshFile {
  TetMesh mesh;            // finalized
  bool has_fibers = false;
  VelocityField velocity;  // frames from the file; speeds left at defaults
};

namespace detail {

// Splits a whitespace-separated line into numeric fields (fast path used for
// multi-million-line mesh files).
inline int split_fields(const std::string& line, std::string_view* out, int max_n) {
  int n = 0;
  std::size_t i = 0;
  const std::size_t len = line.size();
  while (i < len && n < max_n) {
    while (i < len && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t start = i;
    while (i < len && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out[n++] = std::string_view(line).substr(start, i - start);
  }
  return n;
}

}  // namespace detail

inline void write_mesh(const std::string& path, const TetMesh& mesh,
                       const VelocityField* velocity = nullptr) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open mesh file for writing: " + path);
  out << "#vertices\n";
  for (const auto& v : mesh.vertices)
    out << format_double(v.x) << ' ' << format_double(v.y) << ' '
        << format_double(v.z) << '\n';
  out << "#tets\n";
  for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
    const auto& q = mesh.tets[t];
    int label = mesh.region_labels.empty() ? 0 : mesh.region_labels[t];
    out << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << ' ' << label
        << '\n';
  }
  if (velocity) {
    out << "#fibers\n";
    for (std::size_t t = 0; t < mesh.tets.size(); ++t) {
      const Vec3 &f = velocity->fiber[t], &s = velocity->sheet[t];
      out << format_double(f.x) << ' ' << format_double(f.y) << ' '
          << format_double(f.z) << ' ' << format_double(s.x) << ' '
          << format_double(s.y) << ' ' << format_double(s.z) << '\n';
    }
  }
  for (const auto& [name, tris] : mesh.surfaces) {
    out << "#surface " << name << '\n';
    for (const auto& t : tris)
      out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  }
  if (!out) throw IoError("failed while writing mesh file: " + path);
}

inline MeshFile read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file: " + path);
  MeshFile mf;
  enum Section { kNone, kVertices, kTets, kFibers, kSurface } section = kNone;
  std::string current_surface;
  std::string line;
  std::string_view f[8];
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '\r') continue;
    if (line[0] == '#') {
      std::string_view head[2];
      int n = detail::split_fields(line, head, 2);
      std::string tag(head[0]);
      if (tag == "#vertices") section = kVertices;
      else if (tag == "#tets") section = kTets;
      else if (tag == "#fibers") section = kFibers;
      else if (tag == "#surface") {
        section = kSurface;
        if (n < 2) throw IoError("#surface section without a name in " + path);
        current_surface = std::string(head[1]);
      } else throw IoError("unknown mesh section '" + tag + "' in " + path);
      continue;
    }
    switch (section) {
      case kVertices: {
        if (detail::split_fields(line, f, 3) != 3)
          throw IoError("bad vertex line in " + path);
        mf.mesh.vertices.push_back(
            {parse_double(f[0]), parse_double(f[1]), parse_double(f[2])});
        break;
      }
      case kTets: {
        if (detail::split_fields(line, f, 5) != 5)
          throw IoError("bad tet line in " + path);
        mf.mesh.tets.push_back({static_cast<int>(parse_long(f[0])),
                                static_cast<int>(parse_long(f[1])),
                                static_cast<int>(parse_long(f[2])),
                                static_cast<int>(parse_long(f[3]))});
        mf.mesh.region_labels.push_back(static_cast<int>(parse_long(f[4])));
        break;
      }
      case kFibers: {
        if (detail::split_fields(line, f, 6) != 6)
          throw IoError("bad fiber line in " + path);
        mf.velocity.fiber.push_back(
            {parse_double(f[0]), parse_double(f[1]), parse_double(f[2])});
        mf.velocity.sheet.push_back(
            {parse_double(f[3]), parse_double(f[4]), parse_double(f[5])});
        mf.has_fibers = true;
        break;
      }
      case kSurface: {
        if (detail::split_fields(line, f, 3) != 3)
          throw IoError("bad surface triangle line in " + path);
        mf.mesh.surfaces[current_surface].push_back(
            {static_cast<int>(parse_long(f[0])),
             static_cast<int>(parse_long(f[1])),
             static_cast<int>(parse_long(f[2]))});
        break;
      }
      case kNone:
        throw IoError("data before any #section header in " + path);
    }
  }
  if (mf.has_fibers) {
    if (mf.velocity.fiber.size() != mf.mesh.tets.size())
      throw IoError("fiber count does not match tet count in " + path);
    mf.velocity.normal.resize(mf.velocity.fiber.size());
    for (std::size_t t = 0; t < mf.velocity.fiber.size(); ++t)
      mf.velocity.normal[t] =
          mf.velocity.fiber[t].cross(mf.velocity.sheet[t]);
  }
  mf.mesh.finalize();
  if (mf.has_fibers) mf.velocity.validate(mf.mesh);
  return mf;
}

// ------------------------------------------------------------- VTK export ---

// Legacy ASCII unstructured-grid VTK file (write-only).  point_data /
// cell_data are scalar fields keyed by name.
inline void write_vtk(const std::string& path, const TetMesh& mesh,
                      const std::map<std::string, std::vector<double>>& point_data = {},
                      const std::map<std::string, std::vector<double>>& cell_data = {}) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open VTK file for writing: " + path);
  const std::size_t nv = mesh.vertices.size(), nt = mesh.tets.size();
  out << "# vtk DataFile Version 3.0\n";
  out << "eikonal-twin export\n";
  out << "ASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << nv << " double\n";
  for (const auto& v : mesh.vertices)
    out << format_double(v.x) << ' ' << format_double(v.y) << ' '
        << format_double(v.z) << '\n';
  out << "CELLS " << nt << ' ' << 5 * nt << '\n';
  for (const auto& q : mesh.tets)
    out << "4 " << q[0] << ' ' << q[1] << ' ' << q[2] << ' ' << q[3] << '\n';
  out << "CELL_TYPES " << nt << '\n';
  for (std::size_t t = 0; t < nt; ++t) out << "10\n";

  out << "CELL_DATA " << nt << '\n';
  out << "SCALARS region int 1\nLOOKUP_TABLE default\n";
  for (std::size_t t = 0; t < nt; ++t)
    out << (mesh.region_labels.empty() ? 0 : mesh.region_labels[t]) << '\n';
  for (const auto& [name, values] : cell_data) {
    if (values.size() != nt) throw IoError("cell data '" + name + "' size mismatch");
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : values) out << format_double(v) << '\n';
  }
  if (!point_data.empty()) {
    out << "POINT_DATA " << nv << '\n';
    for (const auto& [name, values] : point_data) {
      if (values.size() != nv) throw IoError("point data '" + name + "' size mismatch");
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double v : values) out << format_double(v) << '\n';
    }
  }
  if (!out) throw IoError("failed while writing VTK file: " + path);
}

}  // namespace etwin
