// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace dr3d {

// splitmix64; good enough to whiten seed material.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Counter-style seed derivation. Every random draw in training flows from
// (stream, iteration, lane), so a resumed run replays the exact sequence a
// straight-through run would have produced.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream,
                                 std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = mix64(root ^ 0x243f6a8885a308d3ull);
  h = mix64(h ^ stream);
  h = mix64(h ^ a);
  h = mix64(h ^ b);
  return h;
}

// Named streams; keep values stable, they end up in checkpoints.
enum class RngStream : std::uint64_t {
  kLatents = 1,
  kPoses = 2,
  kStratify = 3,
  kAugment = 4,
  kInit = 5,
  kData = 6,
  kEval = 7,
  kInversion = 8,
};

// mt19937_64 plus hand-rolled output transforms. std::uniform_real_distribution
// and std::normal_distribution are not guaranteed bit-identical across
// standard libraries, and reproducibility here is contractual.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  Rng(std::uint64_t root, RngStream stream, std::uint64_t a = 0,
      std::uint64_t b = 0)
      : gen_(derive_seed(root, static_cast<std::uint64_t>(stream), a, b)) {}

  // Uniform in [0,1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller, cosine branch only. One normal per two uniforms keeps the
  // draw count trivially predictable.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  std::uint64_t raw() { return gen_(); }

  // Uniform integer in [0, n) by rejection; unbiased.
  std::uint64_t index(std::uint64_t n) {
    const std::uint64_t lim = ~std::uint64_t(0) - (~std::uint64_t(0) % n);
    std::uint64_t r = gen_();
    while (r >= lim) r = gen_();
    return r % n;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace dr3d
