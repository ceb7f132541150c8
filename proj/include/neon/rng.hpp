#pragma once

#include <cstdint>

namespace neon {

// Deterministic splitmix64 generator. The standard <random> engines are
// portable but their distributions are not; everything seeded here must
// reproduce bit-exactly across toolchains (golden frames, replay sampling,
// noise injection), so the few draws we need are implemented directly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is < 2^-53 for the small n used
  // here (actions, lanes, buffer indices).
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n));
  }

  // Derives an independent stream; tag values double as documentation of the
  // stream's purpose at the call site.
  Rng fork(std::uint64_t tag) const {
    Rng mix(state_ ^ (0x632be59bd9b4e019ULL * (tag + 1)));
    mix.next_u64();
    return Rng(mix.next_u64());
  }

 private:
  std::uint64_t state_;
};

}  // namespace neon
