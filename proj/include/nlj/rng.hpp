#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>

#include "nlj/common.hpp"

namespace nlj {

// splitmix64: used both as a seed scrambler and as the hash combiner for
// deriving independent per-trial streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic stream derivation: hash the master seed together with a list
// of integer identifiers (stream tag, sweep indices, trial index). Identical
// inputs give identical streams regardless of scheduling.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = master ^ 0x6a09e667f3bcc909ull;
  splitmix64(s);
  for (std::uint64_t id : ids) {
    s ^= splitmix64(s) + id;
    splitmix64(s);
  }
  return splitmix64(s);
}

// xoshiro256++ with splitmix64 seeding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in (0, 1]: never returns 0, so log() is always finite.
  double next_open_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    const double u = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  // Standard real normal via Box-Muller (pairs, one cached).
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(next_open_unit()));
    const double phi = 2.0 * kPi * next_uniform(0.0, 1.0);
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  // Circular complex normal CN(0,1): E|z|^2 = 1, real/imag ~ N(0, 1/2).
  Cplx next_cgaussian() {
    const double r = std::sqrt(-std::log(next_open_unit()));
    const double phi = 2.0 * kPi * next_uniform(0.0, 1.0);
    return {r * std::cos(phi), r * std::sin(phi)};
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace nlj
