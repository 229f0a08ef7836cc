#pragma once

#include <cmath>
#include <cstdint>

namespace grasp {

// Deterministic, platform-independent random stream (splitmix64 core).
// std:: distributions are implementation-defined, so sampling is done by
// hand to keep seeded runs byte-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive integer range.
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  // Standard normal via Box-Muller (no cached spare, two draws per call).
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Independent child stream for a given purpose id.
  static std::uint64_t derive(std::uint64_t master, std::uint64_t stream) {
    Rng mix(master ^ (stream * 0xD1B54A32D192ED03ULL + 0x2545F4914F6CDD1DULL));
    return mix.next_u64();
  }

 private:
  std::uint64_t state_;
};

}  // namespace grasp
