#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace purm {

namespace detail {

// SplitMix64 finalizer; used to decorrelate seeds and stream tags.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic RNG wrapper. All randomness in the library flows through this
// class so that a (seed, stream) pair pins every output bit.
//
// normal() uses Box-Muller without caching the second variate: exactly two
// uniform draws per call, so consumption is easy to reason about when
// deriving reproducible sub-streams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(detail::splitmix64(seed)) {}

  // Independent stream for the same logical seed, e.g. one per worker or
  // per training step.
  static Rng derive(std::uint64_t seed, std::uint64_t stream) {
    return Rng(detail::splitmix64(seed) ^
               detail::splitmix64(stream ^ 0xA5C152D9873A6FD1ULL));
  }

  std::uint64_t raw() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller. u1 is shifted into (0, 1] so the log is
  // finite.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Unbiased integer in [0, n). Rejection sampling on the top of the range.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % n;
    }
  }

  // Fisher-Yates shuffle driven by bounded(); std::shuffle is avoided so the
  // permutation does not depend on library internals.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(bounded(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace purm
