#pragma once

#include <array>
#include <cstdint>

namespace glmm {

/// Seed for every stochastic routine. All generators are pure functions of
/// their arguments and a Seed.
struct Seed {
  std::uint64_t value = 0;

  friend bool operator==(Seed, Seed) = default;
};

/// One SplitMix64 step: advances `state` and returns the mixed output.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives an independent child seed for stream `index` (repetition,
/// restart, cluster, ...). split_seed(s, i) != split_seed(s, j) for i != j
/// with overwhelming probability.
Seed split_seed(Seed base, std::uint64_t index);

/// xoshiro256** generator seeded through SplitMix64.
///
/// Uniform doubles use the top 53 bits; normal variates use the Marsaglia
/// polar method, so the stream only depends on IEEE sqrt/log and is stable
/// across standard library implementations (unlike std::normal_distribution).
class Rng {
 public:
  explicit Rng(Seed seed);

  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). Requires n > 0.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p);
  double normal();

 private:
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace glmm
