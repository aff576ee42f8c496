// Copyright Contributors to the GAVIS Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <gavis/common.hpp>

#include <cmath>
#include <cstdint>

namespace gavis {

// Deterministic, platform-independent generators. std:: distributions make no
// cross-platform reproducibility promises, so everything random in the
// pipeline (virtual-particle sampling, candidate poses, jitter, Monte-Carlo
// oracles) goes through these.

inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Stable sub-seed derivation so independent streams never share state.
inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  return mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ull));
}

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  uint64_t next_below(uint64_t n) { return n ? next_u64() % n : 0; }

  // Box-Muller; one fresh pair per call keeps the stream position
  // independent of how results are consumed.
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * kPi * u2);
  }

  Vec3 normal3() {
    double u1 = next_double();
    double u2 = next_double();
    double u3 = next_double();
    double u4 = next_double();
    double r1 = std::sqrt(-2.0 * std::log1p(-u1));
    double r2 = std::sqrt(-2.0 * std::log1p(-u3));
    return Vec3(r1 * std::cos(2.0 * kPi * u2), r1 * std::sin(2.0 * kPi * u2),
                r2 * std::cos(2.0 * kPi * u4));
  }

  Vec3 unit_vector() {
    double z = uniform(-1.0, 1.0);
    double phi = uniform(0.0, 2.0 * kPi);
    double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(s * std::cos(phi), s * std::sin(phi), z);
  }

  // Shoemake's uniform rotation.
  Quat rotation() {
    double u1 = next_double();
    double u2 = next_double();
    double u3 = next_double();
    double a = std::sqrt(1.0 - u1);
    double b = std::sqrt(u1);
    return Quat(a * std::sin(2.0 * kPi * u2), a * std::cos(2.0 * kPi * u2),
                b * std::sin(2.0 * kPi * u3), b * std::cos(2.0 * kPi * u3));
  }

 private:
  uint64_t state_;
};

}  // namespace gavis
