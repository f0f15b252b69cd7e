#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ipm {

// SplitMix64 finalizer. Every random quantity in the library is a pure function
// of (seed, counter) through this mixer, so results never depend on draw order,
// thread scheduling or the standard library's distribution implementations.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Child seed for sub-task `index` of a run seeded with `parent`.
// Index based, so adding or removing sibling tasks never shifts a child's seed.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  return mix64(parent ^ mix64(index + 0x632be59bd9b4e019ULL));
}

class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : key_(mix64(seed)) {}

  constexpr std::uint64_t bits(std::uint64_t counter) const { return mix64(key_ + mix64(counter)); }

  // Uniform on [0, 1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller on the counter pair (2c, 2c+1).
  double normal(std::uint64_t counter) const {
    const double u1 = static_cast<double>((bits(2 * counter) >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = static_cast<double>(bits(2 * counter + 1) >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t key_;
};

// Sequential view over a CounterRng for code that just wants "the next draw".
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return rng_.uniform(counter_++); }
  double normal() { return rng_.normal(counter_++); }

 private:
  CounterRng rng_;
  std::uint64_t counter_ = 0;
};

}  // namespace ipm
