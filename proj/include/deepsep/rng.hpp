#pragma once

#include <cstdint>
#include <random>

namespace deepsep {

// Portable random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the distributions are implemented
// here instead of using <random>'s, whose algorithms are unspecified.
//
//   uniform01: top 53 bits of one engine draw, scaled by 2^-53, in [0, 1).
//   normal:    Marsaglia polar method; the second variate of each accepted
//              pair is cached and returned by the next call.
//   below(n):  rejection sampling on the raw 64-bit draw (unbiased).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal();
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0);

}  // namespace deepsep
