// Admissible PMJ region: a spatial set S (times non-negative timings), with
// membership tests, Euclidean projection, and area-uniform initial sampling.
//
// Two modes:
//   unrestricted  S = the whole myocardium volume; sampling surface is the
//                 full boundary of the heart mesh.
//   band          S = myocardial points within d_pmj of a masked endocardial
//                 surface S_e.  S_e drops the basal rim (top fraction of the
//                 apico-basal extent, measured along z on the endo surface)
//                 and an azimuthal sector standing in for the RV inferior
//                 wall; sampling is area-uniform on S_e.
//
// Projection is member-first (members are returned unchanged, which makes
// the operation exactly idempotent); non-members move to the closest point
// of the masked surface and then back toward the query by at most the band
// depth, retreating to the surface point if that leaves the myocardium.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "etwin/core.hpp"
#include "etwin/eikonal.hpp"
#include "etwin/mesh.hpp"
#include "etwin/rng.hpp"

namespace etwin {

enum class ConstraintMode { kUnrestricted, kBand };

inline ConstraintMode parse_constraint_mode(const std::string& s) {
  if (s == "unrestricted") return ConstraintMode::kUnrestricted;
  if (s == "band" || s == "restricted") return ConstraintMode::kBand;
  throw ConfigError("constraint mode must be 'unrestricted' or 'band' (got '" +
                    s + "')");
}

struct FeasibleParams {
  ConstraintMode mode = ConstraintMode::kBand;
  double d_pmj = 2.5;          // band depth (mm)
  double basal_cutoff = 0.10;  // basal fraction of the apico-basal extent removed
  bool rv_inferior_mask = true;
  double rv_center_deg = -90;  // sector azimuth center (atan2(y, x), degrees)
  double rv_half_width_deg = 45;
  std::string endo_surface = "endo";

  void validate() const {
    if (!(d_pmj > 0)) throw ConfigError("d_pmj must be positive");
    if (!(basal_cutoff >= 0 && basal_cutoff < 1))
      throw ConfigError("basal cutoff must lie in [0, 1)");
    if (!(rv_half_width_deg >= 0 && rv_half_width_deg <= 180))
      throw ConfigError("rv mask half-width must lie in [0, 180] degrees");
  }
};

class FeasibleRegion {
 public:
  FeasibleRegion(const TetMesh& heart, const FeasibleParams& prm)
      : mesh_(heart), prm_(prm) {
    prm.validate();
    if (!heart.finalized()) throw GeometryError("heart mesh not finalized");
    if (prm_.mode == ConstraintMode::kBand) build_masked_surface();
    build_sampling_surface();
  }

  const TetMesh& mesh() const { return mesh_; }
  const FeasibleParams& params() const { return prm_; }
  ConstraintMode mode() const { return prm_.mode; }

  // Triangles of the masked endocardial source surface (band mode).
  const std::vector<std::array<int, 3>>& source_triangles() const {
    return source_tris_;
  }
  // Triangles positions are sampled from.
  const std::vector<std::array<int, 3>>& sampling_triangles() const {
    return sampling_tris_;
  }

  double distance_to_source(const Vec3& p) const {
    if (prm_.mode != ConstraintMode::kBand)
      throw ConfigError("distance_to_source: region has no band surface");
    return std::sqrt(source_bvh_.closest(p).dist2);
  }

  bool member(const Vec3& p) const {
    auto loc = mesh_.locate_point(p);
    if (!loc.inside) return false;
    if (prm_.mode == ConstraintMode::kUnrestricted) return true;
    return std::sqrt(source_bvh_.closest(p).dist2) <= prm_.d_pmj + 1e-9;
  }

  PMJ project(const PMJ& pmj) const {
    PMJ out = pmj;
    out.t = std::max(0.0, pmj.t);
    if (member(pmj.pos)) return out;

    if (prm_.mode == ConstraintMode::kUnrestricted) {
      // outside the myocardium: closest boundary point
      out.pos = mesh_.closest_boundary_point(pmj.pos).point;
      return out;
    }
    // closest point on the masked surface, then back toward the query by at
    // most the band depth while staying inside the myocardium
    auto hit = source_bvh_.closest(pmj.pos);
    Vec3 c = hit.point;
    Vec3 d = pmj.pos - c;
    double dist = d.norm();
    if (dist > 1e-12) {
      Vec3 dir = d / dist;
      double step = std::min(dist, prm_.d_pmj * (1.0 - 1e-6));
      for (double s : {1.0, 0.5, 0.25, 0.125}) {
        Vec3 cand = c + dir * (step * s);
        if (member(cand)) {
          out.pos = cand;
          return out;
        }
      }
    }
    out.pos = c;  // on S_e: distance 0, inside by construction
    return out;
  }

  PMJSet project(const PMJSet& set) const {
    PMJSet out;
    out.pmjs.reserve(set.pmjs.size());
    for (const auto& p : set.pmjs) out.pmjs.push_back(project(p));
    return out;
  }

  // Area-uniform positions on the sampling surface, i.i.d. uniform timings.
  // Draw order per PMJ: triangle fold, two barycentric uniforms, timing.
  PMJSet sample_initial(int n, double t_lo, double t_hi, Rng& rng) const {
    if (n < 1) throw ConfigError("sample_initial: need n >= 1");
    if (!(t_hi >= t_lo)) throw ConfigError("sample_initial: empty time range");
    PMJSet out;
    out.pmjs.reserve(n);
    for (int i = 0; i < n; ++i) {
      PMJ p;
      p.pos = sample_position(rng);
      p.t = rng.uniform(t_lo, t_hi);
      out.pmjs.push_back(p);
    }
    return out;
  }

  Vec3 sample_position(Rng& rng) const {
    double target = rng.uniform() * sampling_cum_.back();
    std::size_t tri = std::lower_bound(sampling_cum_.begin(),
                                       sampling_cum_.end(), target) -
                      sampling_cum_.begin();
    if (tri >= sampling_tris_.size()) tri = sampling_tris_.size() - 1;
    const auto& tr = sampling_tris_[tri];
    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1) {
      u = 1 - u;
      v = 1 - v;
    }
    const Vec3& a = mesh_.vertices[tr[0]];
    const Vec3& b = mesh_.vertices[tr[1]];
    const Vec3& c = mesh_.vertices[tr[2]];
    return a + (b - a) * u + (c - a) * v;
  }

  // Diagnostics for the surface masking.
  double apico_basal(const Vec3& p) const {
    return (p.z - ab_lo_) / (ab_hi_ - ab_lo_);
  }

 private:
  void build_masked_surface() {
    const auto& endo = mesh_.surface(prm_.endo_surface);
    if (endo.empty()) throw GeometryError("endo surface is empty");

    // apico-basal extent from the endo surface's own z-range
    ab_lo_ = std::numeric_limits<double>::infinity();
    ab_hi_ = -ab_lo_;
    double cx = 0, cy = 0;
    std::size_t cnt = 0;
    for (const auto& tr : endo)
      for (int k = 0; k < 3; ++k) {
        const Vec3& v = mesh_.vertices[tr[k]];
        ab_lo_ = std::min(ab_lo_, v.z);
        ab_hi_ = std::max(ab_hi_, v.z);
        cx += v.x;
        cy += v.y;
        ++cnt;
      }
    cx /= cnt;
    cy /= cnt;
    if (!(ab_hi_ > ab_lo_)) throw GeometryError("degenerate apico-basal extent");

    const double ab_max = 1.0 - prm_.basal_cutoff;
    const double deg = 180.0 / 3.14159265358979323846;
    for (const auto& tr : endo) {
      Vec3 c = (mesh_.vertices[tr[0]] + mesh_.vertices[tr[1]] +
                mesh_.vertices[tr[2]]) / 3.0;
      if (apico_basal(c) > ab_max) continue;
      if (prm_.rv_inferior_mask && prm_.rv_half_width_deg > 0) {
        double az = std::atan2(c.y - cy, c.x - cx) * deg;
        double delta = std::abs(az - prm_.rv_center_deg);
        if (delta > 180) delta = 360 - delta;
        if (delta <= prm_.rv_half_width_deg) continue;
      }
      source_tris_.push_back(tr);
    }
    if (source_tris_.empty())
      throw GeometryError("feasible region: masking removed the whole surface");
    source_bvh_.build(mesh_.vertices, source_tris_);
  }

  void build_sampling_surface() {
    if (prm_.mode == ConstraintMode::kBand) {
      sampling_tris_ = source_tris_;
    } else {
      sampling_tris_ = mesh_.boundary_faces();
      if (sampling_tris_.empty())
        throw GeometryError("feasible region: mesh has no boundary");
    }
    sampling_cum_.clear();
    sampling_cum_.reserve(sampling_tris_.size());
    double acc = 0;
    for (const auto& tr : sampling_tris_) {
      acc += triangle_area(mesh_.vertices[tr[0]], mesh_.vertices[tr[1]],
                           mesh_.vertices[tr[2]]);
      sampling_cum_.push_back(acc);
    }
    if (!(acc > 0)) throw GeometryError("feasible region: zero sampling area");
  }

  const TetMesh& mesh_;
  FeasibleParams prm_;
  std::vector<std::array<int, 3>> source_tris_;
  std::vector<std::array<int, 3>> sampling_tris_;
  std::vector<double> sampling_cum_;
  TriangleBvh source_bvh_;
  double ab_lo_ = 0, ab_hi_ = 1;
};

}  // namespace etwin
