// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace leopos {

inline constexpr double kEarthRadiusKm = 6371.0;
inline constexpr double kEarthRotationRadPerS = 7.2921159e-5;
inline constexpr double kMuKm3PerS2 = 398600.4418;
inline constexpr double kSpeedOfLightKmPerS = 299792.458;
inline constexpr double kSpeedOfLightMPerS = 299792458.0;
inline constexpr double kBoltzmannJPerK = 1.380649e-23;
inline constexpr double kPi = 3.14159265358979323846;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

inline double db2lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin2db(double lin) { return 10.0 * std::log10(lin); }

// Deterministic 64-bit mix/stream (splitmix64). Used instead of std distributions wherever
// byte-identical output across runs and thread counts is part of the contract.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  return splitmix64(s);
}

// Uniform double in [0, 1) from a 64-bit word (53-bit mantissa).
inline double to_unit_double(std::uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next_u64() { return splitmix64(state_); }
  double uniform01() { return to_unit_double(next_u64()); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Box-Muller; consumes two words per pair, caches the second deviate.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    cached_ = r * std::sin(a);
    has_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace leopos
