#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace asc {

/// Seeded random stream. The engine is std::mt19937_64, whose output sequence
/// the standard pins down; every distribution below is implemented here
/// rather than with <random> distributions, whose algorithms vary between
/// standard libraries. Draws are therefore identical across platforms.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  /// Stream for worker i of a parallel job: seed = master XOR i.
  Rng split(std::uint64_t worker) const { return Rng(seed_ ^ worker); }

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] inclusive, unbiased (rejection sampling).
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller (one value per call).
  double normal();
  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);
  double beta(double a, double b);
  /// Uniformly random permutation of 0..n-1 (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace asc
