#include "harness/prng.hpp"

#include <stdexcept>

namespace harness {

namespace {
constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) {
  std::uint64_t z = x + kGoldenGamma;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t prng_split(std::uint64_t seed_a, std::uint64_t seed_b) {
  return splitmix64(seed_a ^ (seed_b * kGoldenGamma));
}

Pcg32::Pcg32(std::uint64_t seed) { seed_with(seed, kDefaultIncrement); }

Pcg32::Pcg32(std::uint64_t initstate, std::uint64_t initseq) {
  seed_with(initstate, (initseq << 1U) | 1U);
}

void Pcg32::seed_with(std::uint64_t initstate, std::uint64_t inc) {
  state_ = 0;
  inc_ = inc | 1U;
  next();
  state_ += initstate;
  next();
}

std::uint32_t Pcg32::next() {
  const std::uint64_t old = state_;
  state_ = old * kMultiplier + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18U) ^ old) >> 27U);
  const auto rot = static_cast<std::uint32_t>(old >> 59U);
  return (xorshifted >> rot) | (xorshifted << ((32U - rot) & 31U));
}

std::uint32_t Pcg32::below(std::uint32_t bound) {
  if (bound == 0) throw std::invalid_argument("Pcg32::below: bound must be positive");
  const std::uint32_t threshold = (0U - bound) % bound;
  for (;;) {
    const std::uint32_t r = next();
    if (r >= threshold) return r % bound;
  }
}

double Pcg32::uniform() { return static_cast<double>(next()) * 0x1.0p-32; }

}  // namespace harness
