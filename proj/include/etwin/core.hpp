// Small dense math types and error categories shared across the library.
// Units convention: lengths in mm, times in ms, speeds in mm/ms (== m/s),
// conductivities in S/m, potentials in mV.
#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>

namespace etwin {

inline constexpr const char* kCodeVersion = "0.1.0";

// ---------------------------------------------------------------- errors ---

// Bad or inconsistent user input (config files, CLI arguments, file formats).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Geometric preconditions violated (degenerate cells, points outside domain).
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure (non-convergence, singular systems).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File and serialization problems.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------------ Vec3 ---

struct Vec3 {
  double x = 0, y = 0, z = 0;

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  Vec3 operator-() const { return {-x, -y, -z}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
  Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double squared_norm() const { return dot(*this); }
  double norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const {
    double n = norm();
    if (n == 0) throw GeometryError("cannot normalize zero vector");
    return *this / n;
  }
  bool finite() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.dot(b); }
inline Vec3 cross(const Vec3& a, const Vec3& b) { return a.cross(b); }

inline Vec3 min(const Vec3& a, const Vec3& b) {
  return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)};
}
inline Vec3 max(const Vec3& a, const Vec3& b) {
  return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)};
}

// -------------------------------------------------------------- SymMat3 ----

// Symmetric 3x3 matrix, stored as the upper triangle.
struct SymMat3 {
  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;

  static SymMat3 identity() { return {1, 0, 0, 1, 0, 1}; }

  static SymMat3 outer(const Vec3& v) {
    return {v.x * v.x, v.x * v.y, v.x * v.z, v.y * v.y, v.y * v.z, v.z * v.z};
  }

  SymMat3 operator+(const SymMat3& o) const {
    return {xx + o.xx, xy + o.xy, xz + o.xz, yy + o.yy, yz + o.yz, zz + o.zz};
  }
  SymMat3 operator*(double s) const {
    return {xx * s, xy * s, xz * s, yy * s, yz * s, zz * s};
  }
  SymMat3& operator+=(const SymMat3& o) {
    xx += o.xx; xy += o.xy; xz += o.xz; yy += o.yy; yz += o.yz; zz += o.zz;
    return *this;
  }

  Vec3 apply(const Vec3& v) const {
    return {xx * v.x + xy * v.y + xz * v.z,
            xy * v.x + yy * v.y + yz * v.z,
            xz * v.x + yz * v.y + zz * v.z};
  }
  // v' * M * v
  double quad(const Vec3& v) const { return v.dot(apply(v)); }
  // a' * M * b
  double bilinear(const Vec3& a, const Vec3& b) const { return a.dot(apply(b)); }

  double det() const {
    return xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) +
           xz * (xy * yz - yy * xz);
  }

  SymMat3 inverse() const {
    double d = det();
    if (d == 0) throw NumericError("singular 3x3 matrix");
    double inv = 1.0 / d;
    return {(yy * zz - yz * yz) * inv, (xz * yz - xy * zz) * inv,
            (xy * yz - xz * yy) * inv, (xx * zz - xz * xz) * inv,
            (xz * xy - xx * yz) * inv, (xx * yy - xy * xy) * inv};
  }

  double max_abs() const {
    double m = 0;
    for (double v : {xx, xy, xz, yy, yz, zz}) m = std::max(m, std::abs(v));
    return m;
  }
};

// --------------------------------------------------------------- hashing ---

// FNV-1a over raw bytes; used for cheap content fingerprints (tape staleness
// checks, config hashes in run metadata).
struct Fnv1a {
  std::uint64_t state = 1469598103934665603ull;

  void feed(const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state ^= p[i];
      state *= 1099511628211ull;
    }
  }
  void feed(double v) { feed(&v, sizeof v); }
  void feed(std::uint64_t v) { feed(&v, sizeof v); }
  void feed(int v) { feed(&v, sizeof v); }
  void feed(const std::string& s) { feed(s.data(), s.size()); }
  std::uint64_t digest() const { return state; }
};

// --------------------------------------------------------- number output ---

// Shortest round-trip decimal form; keeps text artifacts byte-reproducible.
inline std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto res = std::from_chars(b, e, v);
  const char* p = res.ptr;
  while (p < e && (*p == ' ' || *p == '\t')) ++p;
  if (res.ec != std::errc() || p != e)
    throw IoError("bad numeric field: '" + std::string(s) + "'");
  return v;
}

inline long parse_long(std::string_view s) {
  long v = 0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  auto res = std::from_chars(b, e, v);
  const char* p = res.ptr;
  while (p < e && (*p == ' ' || *p == '\t')) ++p;
  if (res.ec != std::errc() || p != e)
    throw IoError("bad integer field: '" + std::string(s) + "'");
  return v;
}

}  // namespace etwin
