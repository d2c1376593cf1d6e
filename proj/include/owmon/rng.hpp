#pragma once
#include <cstdint>
#include <initializer_list>
#include <random>

namespace owmon {

/// SplitMix64 step; used to whiten seeds and derive independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives a child seed from a master seed and a path of stream indices.
/// Distinct paths give statistically independent streams.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = master;
  std::uint64_t out = splitmix64(s);
  for (std::uint64_t idx : path) {
    s = out ^ (idx + 0x9E3779B97F4A7C15ULL);
    out = splitmix64(s);
  }
  return out;
}

/// Seedable random stream. All stochastic operations take one of these
/// explicitly so callers control determinism and parallel decomposition.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  static RngStream derive(std::uint64_t master,
                          std::initializer_list<std::uint64_t> path) {
    return RngStream(derive_seed(master, path));
  }

  std::uint64_t seed() const { return seed_; }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>{lo, hi}(engine_);
  }

  /// Uniform integer in [lo, hi] inclusive.
  long uniform_int(long lo, long hi) {
    return std::uniform_int_distribution<long>{lo, hi}(engine_);
  }

  double normal(double mean, double stddev) {
    // Fresh distribution per call: avoids the cached-pair state interacting
    // with changing parameters.
    return std::normal_distribution<double>{mean, stddev}(engine_);
  }

  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>{shape, scale}(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace owmon
