// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace weathercycle {

// Deterministic counter-free RNG built on splitmix64. The standard-library
// distributions are implementation-defined sequences, so everything that has
// to reproduce bit-exactly (batch sampling, chroma noise, weight init) goes
// through this instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform index in [0, n).
  int next_index(int n) {
    int i = static_cast<int>(next_double() * n);
    return i < n ? i : n - 1;
  }

  // Box-Muller; two uniforms per draw, no cached spare.
  double normal(double mean = 0.0, double sigma = 1.0) {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

// Stable seed derivation for independent random streams hung off one base
// seed, e.g. derive_seed(seed, {kStreamNoise, step, item}).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  std::uint64_t h = base ^ 0x51afd7ed558ccd6dULL;
  for (std::uint64_t v : stream) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    Rng mix(h);
    h = mix.next_u64();
  }
  return h;
}

// Named random streams so call sites cannot collide by accident.
enum RandomStream : std::uint64_t {
  kStreamInit = 1,
  kStreamBatch = 2,
  kStreamNoise = 3,
  kStreamPool = 4,
  kStreamAugment = 5,
};

}  // namespace weathercycle
