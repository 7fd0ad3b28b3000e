#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "cnc/linalg.hpp"

namespace cnc {

// Deterministic RNG wrapper. All sampling routines are implemented on top
// of the raw 64-bit stream so that outputs are identical across standard
// library implementations (std::normal_distribution etc. are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return (gen_() >> 11) * (1.0 / 9007199254740992.0); }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (no spare caching).
  double normal() {
    double u1 = uniform01();
    double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  Vec normal_vec(std::size_t d) {
    Vec v(d);
    for (auto& x : v) x = normal();
    return v;
  }

  // Uniform on the unit sphere (gaussian direction, normalized).
  Vec unit_sphere(std::size_t d) {
    for (;;) {
      Vec v = normal_vec(d);
      double n = norm2(v);
      if (n > 1e-12) {
        for (auto& x : v) x /= n;
        return v;
      }
    }
  }

  // Uniform in the unit ball: sphere direction times radius u^{1/d}.
  Vec unit_ball(std::size_t d) {
    Vec v = unit_sphere(d);
    double radius = std::pow(uniform01(), 1.0 / static_cast<double>(d));
    for (auto& x : v) x *= radius;
    return v;
  }

  std::size_t index_below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }

 private:
  std::mt19937_64 gen_;
};

// Stable stream derivation so that concurrent grid cells get independent,
// order-free seeds (splitmix64 finalizer over the combined key).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cnc
