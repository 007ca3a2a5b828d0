#pragma once

#include <cstdint>
#include <random>

namespace urie {

/// Seedable generator built on std::mt19937_64, whose output sequence is fixed
/// by the C++ standard. All derived draws (uniform reals, bounded integers,
/// normals) are computed here rather than through <random> distributions,
/// whose algorithms differ between standard library implementations.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound) by rejection sampling. Throws
  /// ContractError for bound == 0.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via the Box-Muller transform (one value per call; the
  /// second variate is discarded so the stream position is draw-count
  /// independent).
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Derives an independent child seed; advances this generator.
  std::uint64_t split() { return next_u64(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace urie
