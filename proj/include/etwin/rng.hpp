// Deterministic random numbers. std::mt19937_64 output is pinned by the
// standard, but the standard *distributions* are not; the draw helpers here
// implement fixed algorithms so that seeded results are bit-identical across
// compilers and platforms.
#pragma once

#include <cstdint>
#include <random>

#include "etwin/core.hpp"

namespace etwin {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t raw() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n) by rejection (unbiased).
  std::uint64_t index(std::uint64_t n) {
    if (n == 0) throw NumericError("Rng::index on empty range");
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do { v = eng_(); } while (v >= limit);
    return v % n;
  }

  // Standard normal via Box–Muller (fixed algorithm, no cached spare so the
  // draw count per call is constant).
  double normal() {
    double u1 = 0;
    while (u1 == 0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
  }

  // Derive an independent child seed (for per-run streams in ensembles).
  std::uint64_t child_seed() { return splitmix(eng_()); }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace etwin
