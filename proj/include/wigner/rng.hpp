#pragma once

#include <cmath>
#include <cstdint>

namespace wigner {

// Counter-based pseudo-random numbers built on splitmix64.  All stochastic
// code in the library draws through these helpers rather than the <random>
// distributions, whose output is implementation-defined; a fixed seed must
// reproduce the same stream on every platform.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent substream state for (root seed, stream index) pairs.
/// Used for per-frame and per-trial seeding so that results do not depend
/// on evaluation order.  The combined value must pass through the full
/// splitmix64 avalanche and its *output* become the stream origin: a state
/// linear in the index would advance by the same golden-ratio increment the
/// generator itself uses, making nearby substreams shifted copies of one
/// master sequence.
inline std::uint64_t substream_state(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

struct Rng {
  std::uint64_t state = 0;

  explicit Rng(std::uint64_t seed = 0) : state(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : state(substream_state(seed, stream)) {}

  std::uint64_t next_u64() { return splitmix64(state); }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).  Modulo bias is below 2^-50 for any n that
  /// occurs here (bin counts, gate widths).
  std::uint64_t uniform_below(std::uint64_t n) { return next_u64() % n; }

  /// Signed uniform integer in [-half, +half].
  std::int64_t uniform_signed(std::int64_t half) {
    return static_cast<std::int64_t>(uniform_below(static_cast<std::uint64_t>(2 * half + 1))) - half;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal deviate (Box-Muller, one value per call).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  /// Poisson deviate by inversion of the exponential waiting times (Knuth).
  /// Fine for the small means in play (dark counts per frame).
  std::int64_t poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    std::int64_t k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }
};

} // namespace wigner
