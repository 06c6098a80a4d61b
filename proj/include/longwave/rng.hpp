#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace longwave {

namespace detail {

/// SplitMix64 finalizer. Bijective on uint64, good avalanche.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Derive a child seed from a parent seed and a sequence of tags
/// (cell indices, replicate numbers, stream ids). Order-sensitive.
inline std::uint64_t derive_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = detail::mix64(seed ^ 0x6c62272e07bb0142ULL);
  for (std::uint64_t t : tags) h = detail::mix64(h ^ detail::mix64(t));
  return h;
}

/// Counter-based generator: the i-th output is a pure function of
/// (seed, i), so streams can be split and replayed independently of
/// thread scheduling. Output quality is that of SplitMix64.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t next_u64() { return detail::mix64(seed_ ^ detail::mix64(counter_++)); }

  /// Uniform on (0,1), never exactly 0 or 1.
  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller; consumes exactly two uniforms per pair.
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = next_uniform();
    const double u2 = next_uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace longwave
