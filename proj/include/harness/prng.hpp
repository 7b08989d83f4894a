#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace harness {

/// splitmix64 finalizer applied to `x + golden gamma`; equals the first
/// output of a splitmix64 generator whose state starts at `x`.
std::uint64_t splitmix64(std::uint64_t x);

/// Child-seed derivation used for every seed in the harness.
std::uint64_t prng_split(std::uint64_t seed_a, std::uint64_t seed_b);

/// PCG32 (XSH-RR output, 64-bit LCG state).
class Pcg32 {
 public:
  static constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
  // Stream used when only a 64-bit seed is supplied (odd by construction).
  static constexpr std::uint64_t kDefaultIncrement = 1442695040888963407ULL;

  /// Seeds with the default stream increment.
  explicit Pcg32(std::uint64_t seed);
  /// Reference-style seeding: increment = (initseq << 1) | 1.
  Pcg32(std::uint64_t initstate, std::uint64_t initseq);

  std::uint32_t next();
  /// Unbiased value in [0, bound); bound must be positive.
  std::uint32_t below(std::uint32_t bound);
  /// Uniform double in [0, 1) with 32 bits of resolution.
  double uniform();

  std::uint64_t state() const { return state_; }
  std::uint64_t increment() const { return inc_; }

  bool operator==(const Pcg32&) const = default;

 private:
  void seed_with(std::uint64_t initstate, std::uint64_t inc);

  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 1;
};

/// In-place Fisher-Yates shuffle: descending index i, swap with below(i+1).
template <typename T>
void fisher_yates(std::span<T> items, Pcg32& rng) {
  for (std::size_t i = items.size(); i-- > 1;) {
    const auto j = rng.below(static_cast<std::uint32_t>(i + 1));
    std::swap(items[i], items[j]);
  }
}

}  // namespace harness
