#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace treespin {

// Counter-based generator (SplitMix64 core). A stream is derived from
// (seed, stream_id), so parallel replicas get independent, reproducible
// streams regardless of scheduling.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : state_(mix(mix(seed) + 0x9E3779B97F4A7C15ULL * (stream + 1))) {}

  static Rng stream_of(uint64_t seed, uint64_t replica) { return Rng(seed, replica); }

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  // uniform in [0,1), 53 random bits
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n), unbiased (rejection)
  uint64_t uniform_int(uint64_t n) {
    if (n <= 1) return 0;
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  // index sampled proportionally to nonnegative weights (inverse CDF)
  int discrete(std::span<const double> w) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = uniform() * total;
    double acc = 0.0;
    int last = 0;
    for (int i = 0; i < static_cast<int>(w.size()); ++i) {
      if (w[i] <= 0.0) continue;
      acc += w[i];
      last = i;
      if (u < acc) return i;
    }
    return last;  // u landed on the rounding tail
  }

  double gaussian() {
    // Box-Muller, one value per call (simplicity over caching the pair)
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  uint64_t state_;
};

}  // namespace treespin
