#pragma once

#include <cstddef>
#include <cstdint>

#include "eli/numeric/matrix.hpp"

namespace eli::numeric {

/// Counter-based pseudo-random generator.
///
/// Output k of a generator is a pure function of (seed, k): the SplitMix64
/// finalizer applied to key + k * golden-gamma. Nothing depends on the
/// platform's <random> implementation, so streams agree everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  // Uniform in (0, 1].
  double uniform_positive();
  // Uniform integer in [0, n); n must be positive.
  std::size_t uniform_index(std::size_t n);
  double normal();

  // Independent child generator keyed by (seed, stream). Does not advance
  // this generator.
  Rng split(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t x);

/// Matrix of i.i.d. N(0, 1) draws (Box-Muller over the counter stream).
Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace eli::numeric
