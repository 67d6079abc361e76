#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>

namespace qode {

/// SplitMix64 generator. Chosen over the standard-library engines because its
/// output sequence is fixed by the algorithm, so seeded runs reproduce
/// bit-for-bit across platforms and standard-library versions.
struct SplitMix64 {
  std::uint64_t state = 0;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  /// Independent stream for trial `stream_index` of a base seed.
  static SplitMix64 stream(std::uint64_t base_seed, std::uint64_t stream_index) {
    SplitMix64 g(base_seed);
    std::uint64_t derived = g.next() + stream_index * 0x9E3779B97F4A7C15ULL;
    return SplitMix64(derived);
  }

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_double() { return (double)(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Standard normal via Box-Muller; consumes exactly two outputs.
  double next_gaussian() {
    const double u1 = ((double)(next() >> 11) + 0.5) * 0x1.0p-53;  // in (0, 1)
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Index drawn from an (unnormalized-tolerant) probability vector.
  int next_categorical(const Eigen::VectorXd& probs) {
    const double u = next_double() * probs.sum();
    double cum = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
      cum += probs(i);
      if (u < cum) return i;
    }
    return (int)probs.size() - 1;
  }
};

}  // namespace qode
