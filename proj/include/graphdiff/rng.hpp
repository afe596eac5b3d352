#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace graphdiff {

// splitmix64 finalizer; used to derive independent streams from a seed.
std::uint64_t mix64(std::uint64_t x) noexcept;
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0) noexcept;

// Thin wrapper over mt19937_64 whose derived draws do not depend on the
// standard library's distribution implementations, so streams are stable
// across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1) with 53 bits of precision.
  double uniform();
  // Uniform in [0, n). n must be > 0.
  std::size_t uniform_int(std::size_t n);
  bool bernoulli(double p) { return uniform() < p; }
  // Index drawn proportionally to nonnegative weights (need not sum to 1).
  // Falls back to the last positive weight if rounding leaves no pick.
  std::size_t categorical(std::span<const double> weights);

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<std::size_t>(last - first);
    for (std::size_t i = n; i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace graphdiff
