// Electrode layouts and lead definitions on the torso surface.
//
// An electrode is a named point snapped to the nearest torso-skin vertex
// (ties go to the smallest vertex index).  A lead is a zero-sum weighted
// combination of electrode potentials.  Unipolar chest/vest leads reference
// Wilson's central terminal: +1 at the electrode and -1/3 at each limb
// electrode.  Three layouts are built in:
//
//   limb4     4 electrodes (RA LA LL RL) -> 6 leads I II III aVR aVL aVF
//   ecg12     10 electrodes (limbs + V1..V6) -> 12 standard leads
//   vest(n)   n in {32, 64, 128}: n/2 anterior + n/2 posterior grid
//             electrodes, all unipolar vs. WCT, plus the limb electrodes
//
// Electrode coordinates are parameterized as fractions of the torso
// bounding box so the same layout works across mesh resolutions.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/mesh.hpp"
#include "etwin/mesh_io.hpp"

namespace etwin {

struct Electrode {
  std::string name;
  Vec3 requested;  // layout position before snapping
  Vec3 pos;        // snapped vertex position
  int vertex = -1; // full-mesh vertex index on the torso surface
};

struct LeadDef {
  std::string name;
  std::vector<std::pair<int, double>> terms;  // (electrode index, weight)

  double weight_sum() const {
    double s = 0;
    for (auto& t : terms) s += t.second;
    return s;
  }
};

struct LeadLayout {
  std::string kind;  // "limb4", "ecg12", "vest32", ...
  std::vector<Electrode> electrodes;
  std::vector<LeadDef> leads;
};

// Per-lead, per-heart-vertex projection vectors (the "B" rows).
struct LeadMatrix {
  std::vector<std::string> names;
  int vertex_count = 0;
  std::vector<std::vector<double>> rows;  // [lead][heart vertex]

  int lead_count() const { return static_cast<int>(rows.size()); }
};

// Snap a point to the nearest vertex used by a named surface; exact ties go
// to the smallest vertex index (brute force over surface vertices, which is
// deterministic regardless of any spatial index).
inline int snap_to_surface_vertex(const TetMesh& mesh, const std::string& surf,
                                  const Vec3& p) {
  const auto& tris = mesh.surface(surf);
  std::vector<std::uint8_t> seen(mesh.vertex_count(), 0);
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const auto& tri : tris)
    for (int k = 0; k < 3; ++k) {
      int v = tri[k];
      if (seen[v]) continue;
      seen[v] = 1;
      double d2 = (mesh.vertices[v] - p).squared_norm();
      if (d2 < best_d2 || (d2 == best_d2 && v < best)) {
        best_d2 = d2;
        best = v;
      }
    }
  if (best < 0) throw GeometryError("surface '" + surf + "' has no vertices");
  return best;
}

namespace detail {

inline std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i])))
      ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])))
      ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline Vec3 box_frac(const Vec3& lo, const Vec3& hi, double fx, double fy,
                     double fz) {
  return {lo.x + fx * (hi.x - lo.x), lo.y + fy * (hi.y - lo.y),
          lo.z + fz * (hi.z - lo.z)};
}

// Limb electrode positions as box fractions.  Convention: +x patient left,
// +y anterior, +z superior.
inline std::vector<std::pair<std::string, Vec3>> limb_fractions() {
  return {
      {"RA", {0.10, 0.50, 0.95}},  // right shoulder
      {"LA", {0.90, 0.50, 0.95}},  // left shoulder
      {"LL", {0.75, 0.50, 0.02}},  // left lower torso
      {"RL", {0.25, 0.50, 0.02}},  // right lower torso (reference only)
  };
}

inline std::vector<std::pair<std::string, Vec3>> precordial_fractions() {
  // V1..V6 sweep from right parasternal across the left anterior chest.
  return {
      {"V1", {0.42, 0.97, 0.55}}, {"V2", {0.58, 0.97, 0.55}},
      {"V3", {0.65, 0.95, 0.47}}, {"V4", {0.72, 0.92, 0.40}},
      {"V5", {0.82, 0.80, 0.40}}, {"V6", {0.92, 0.62, 0.40}},
  };
}

inline void add_electrode(LeadLayout& lay, const TetMesh& mesh,
                          const std::string& surf, const std::string& name,
                          const Vec3& p) {
  Electrode e;
  e.name = name;
  e.requested = p;
  e.vertex = snap_to_surface_vertex(mesh, surf, p);
  e.pos = mesh.vertices[e.vertex];
  lay.electrodes.push_back(e);
}

inline int electrode_index(const LeadLayout& lay, const std::string& name) {
  for (std::size_t i = 0; i < lay.electrodes.size(); ++i)
    if (lay.electrodes[i].name == name) return static_cast<int>(i);
  throw ConfigError("layout is missing electrode " + name);
}

inline void add_limb_leads(LeadLayout& lay) {
  int ra = electrode_index(lay, "RA");
  int la = electrode_index(lay, "LA");
  int ll = electrode_index(lay, "LL");
  lay.leads.push_back({"I", {{la, 1.0}, {ra, -1.0}}});
  lay.leads.push_back({"II", {{ll, 1.0}, {ra, -1.0}}});
  lay.leads.push_back({"III", {{ll, 1.0}, {la, -1.0}}});
  lay.leads.push_back({"aVR", {{ra, 1.0}, {la, -0.5}, {ll, -0.5}}});
  lay.leads.push_back({"aVL", {{la, 1.0}, {ra, -0.5}, {ll, -0.5}}});
  lay.leads.push_back({"aVF", {{ll, 1.0}, {ra, -0.5}, {la, -0.5}}});
}

inline void add_wct_lead(LeadLayout& lay, const std::string& name, int e) {
  int ra = electrode_index(lay, "RA");
  int la = electrode_index(lay, "LA");
  int ll = electrode_index(lay, "LL");
  const double third = 1.0 / 3.0;
  lay.leads.push_back(
      {name, {{e, 1.0}, {ra, -third}, {la, -third}, {ll, -third}}});
}

}  // namespace detail

inline LeadLayout build_limb4_layout(const TetMesh& mesh,
                                     const std::string& surf = "torso_skin") {
  LeadLayout lay;
  lay.kind = "limb4";
  Vec3 lo = mesh.bbox_lo(), hi = mesh.bbox_hi();
  for (const auto& [name, f] : detail::limb_fractions())
    detail::add_electrode(lay, mesh, surf, name,
                          detail::box_frac(lo, hi, f.x, f.y, f.z));
  detail::add_limb_leads(lay);
  return lay;
}

inline LeadLayout build_ecg12_layout(const TetMesh& mesh,
                                     const std::string& surf = "torso_skin") {
  LeadLayout lay;
  lay.kind = "ecg12";
  Vec3 lo = mesh.bbox_lo(), hi = mesh.bbox_hi();
  for (const auto& [name, f] : detail::limb_fractions())
    detail::add_electrode(lay, mesh, surf, name,
                          detail::box_frac(lo, hi, f.x, f.y, f.z));
  std::vector<int> chest;
  for (const auto& [name, f] : detail::precordial_fractions()) {
    detail::add_electrode(lay, mesh, surf, name,
                          detail::box_frac(lo, hi, f.x, f.y, f.z));
    chest.push_back(static_cast<int>(lay.electrodes.size()) - 1);
  }
  detail::add_limb_leads(lay);
  for (std::size_t i = 0; i < chest.size(); ++i)
    detail::add_wct_lead(lay, lay.electrodes[chest[i]].name, chest[i]);
  return lay;
}

// Grid dimensions (rows x cols) per torso side for each supported vest size.
inline std::pair<int, int> vest_grid_dims(int n) {
  switch (n) {
    case 32: return {4, 4};
    case 64: return {8, 4};
    case 128: return {8, 8};
    default:
      throw ConfigError("vest size must be one of 32, 64, 128 (got " +
                        std::to_string(n) + ")");
  }
}

inline LeadLayout build_vest_layout(const TetMesh& mesh, int n,
                                    const std::string& surf = "torso_skin") {
  auto [rows, cols] = vest_grid_dims(n);
  LeadLayout lay;
  lay.kind = "vest" + std::to_string(n);
  Vec3 lo = mesh.bbox_lo(), hi = mesh.bbox_hi();
  for (const auto& [name, f] : detail::limb_fractions())
    detail::add_electrode(lay, mesh, surf, name,
                          detail::box_frac(lo, hi, f.x, f.y, f.z));
  // electrode band: central 60% of width, central band of height
  auto grid_frac = [&](int r, int c) {
    double fx = 0.20 + 0.60 * (cols == 1 ? 0.5 : double(c) / (cols - 1));
    double fz = 0.15 + 0.65 * (rows == 1 ? 0.5 : double(r) / (rows - 1));
    return std::pair<double, double>(fx, fz);
  };
  std::vector<int> pads;
  for (int side = 0; side < 2; ++side) {  // 0 anterior (+y), 1 posterior (-y)
    double fy = side == 0 ? 1.0 : 0.0;
    char tag = side == 0 ? 'A' : 'P';
    int idx = 1;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c, ++idx) {
        auto [fx, fz] = grid_frac(r, c);
        std::string name = tag + std::string(idx < 10 ? "0" : "") +
                           std::to_string(idx);
        detail::add_electrode(lay, mesh, surf, name,
                              detail::box_frac(lo, hi, fx, fy, fz));
        pads.push_back(static_cast<int>(lay.electrodes.size()) - 1);
      }
  }
  for (int e : pads) detail::add_wct_lead(lay, lay.electrodes[e].name, e);
  return lay;
}

// "limb4" | "ecg12" | "vest32" | "vest64" | "vest128"
inline LeadLayout build_layout(const TetMesh& mesh, const std::string& kind,
                               const std::string& surf = "torso_skin") {
  if (kind == "limb4") return build_limb4_layout(mesh, surf);
  if (kind == "ecg12") return build_ecg12_layout(mesh, surf);
  if (kind.rfind("vest", 0) == 0)
    return build_vest_layout(mesh, static_cast<int>(parse_long(kind.substr(4))),
                             surf);
  throw ConfigError("unknown lead layout '" + kind + "'");
}

// Layout + solved per-lead fields.  z rows are the lead fields restricted to
// heart vertices; b rows are the calibrated projection vectors used by the
// ECG forward model.
struct LeadSet {
  LeadLayout layout;
  double scale = 0.32;              // output calibration applied inside b
  std::vector<std::vector<double>> z;  // [lead][heart vertex]
  LeadMatrix b;
};

// ---- archive -------------------------------------------------------------------
//
//   # leadset v1
//   kind <layout>
//   scale <s>
//   heart_vertices <nv>
//   #electrodes <n>
//   <name> <x> <y> <z> <vertex>
//   #lead <name> <terms>
//   <electrode index> <weight>
//   #b <lead index>
//   <nv values, one per line>

inline void write_leadset(const std::string& path, const LeadSet& ls) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path);
  f << "# leadset v1\n";
  f << "kind " << ls.layout.kind << "\n";
  f << "scale " << format_double(ls.scale) << "\n";
  f << "heart_vertices " << ls.b.vertex_count << "\n";
  f << "#electrodes " << ls.layout.electrodes.size() << "\n";
  for (const auto& e : ls.layout.electrodes)
    f << e.name << ' ' << format_double(e.pos.x) << ' '
      << format_double(e.pos.y) << ' ' << format_double(e.pos.z) << ' '
      << e.vertex << "\n";
  for (const auto& ld : ls.layout.leads) {
    f << "#lead " << ld.name << ' ' << ld.terms.size() << "\n";
    for (const auto& [e, w] : ld.terms)
      f << e << ' ' << format_double(w) << "\n";
  }
  for (std::size_t l = 0; l < ls.b.rows.size(); ++l) {
    f << "#b " << l << "\n";
    for (double v : ls.b.rows[l]) f << format_double(v) << "\n";
  }
  if (!f) throw IoError("write failed: " + path);
}

inline LeadSet read_leadset(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open " + path);
  LeadSet ls;
  std::string line;
  if (!std::getline(f, line) || line.rfind("# leadset", 0) != 0)
    throw IoError(path + ": not a leadset archive");
  int n_electrodes = -1;
  int current_b = -1;
  std::size_t b_fill = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto fields = detail::tokenize(line);
    if (fields.empty()) continue;
    const std::string& key = fields[0];
    if (key == "kind" && fields.size() == 2) {
      ls.layout.kind = fields[1];
    } else if (key == "scale" && fields.size() == 2) {
      ls.scale = parse_double(fields[1]);
    } else if (key == "heart_vertices" && fields.size() == 2) {
      ls.b.vertex_count = static_cast<int>(parse_long(fields[1]));
    } else if (key == "#electrodes" && fields.size() == 2) {
      n_electrodes = static_cast<int>(parse_long(fields[1]));
      ls.layout.electrodes.reserve(n_electrodes);
    } else if (key == "#lead" && fields.size() == 3) {
      LeadDef ld;
      ld.name = fields[1];
      int nterms = static_cast<int>(parse_long(fields[2]));
      for (int i = 0; i < nterms; ++i) {
        if (!std::getline(f, line)) throw IoError(path + ": truncated lead");
        auto tf = detail::tokenize(line);
        if (tf.size() != 2) throw IoError(path + ": bad lead term");
        ld.terms.push_back({static_cast<int>(parse_long(tf[0])),
                            parse_double(tf[1])});
      }
      ls.layout.leads.push_back(std::move(ld));
    } else if (key == "#b" && fields.size() == 2) {
      current_b = static_cast<int>(parse_long(fields[1]));
      if (current_b != static_cast<int>(ls.b.rows.size()))
        throw IoError(path + ": b rows out of order");
      ls.b.rows.emplace_back();
      ls.b.rows.back().reserve(ls.b.vertex_count);
      b_fill = 0;
      for (int i = 0; i < ls.b.vertex_count; ++i) {
        if (!std::getline(f, line)) throw IoError(path + ": truncated b row");
        ls.b.rows.back().push_back(parse_double(line));
        ++b_fill;
      }
    } else if (n_electrodes > 0 &&
               static_cast<int>(ls.layout.electrodes.size()) < n_electrodes &&
               fields.size() == 5) {
      Electrode e;
      e.name = fields[0];
      e.pos = {parse_double(fields[1]), parse_double(fields[2]),
               parse_double(fields[3])};
      e.requested = e.pos;
      e.vertex = static_cast<int>(parse_long(fields[4]));
      ls.layout.electrodes.push_back(e);
    } else {
      throw IoError(path + ": unrecognized line '" + line + "'");
    }
  }
  for (const auto& ld : ls.layout.leads) ls.b.names.push_back(ld.name);
  if (ls.b.rows.size() != ls.layout.leads.size())
    throw IoError(path + ": lead/b row count mismatch");
  (void)b_fill;
  return ls;
}

}  // namespace etwin
