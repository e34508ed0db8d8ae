#pragma once

// Deterministic counter-style RNG. Every random decision in the library is
// derived from an explicit (seed, stream) pair so runs replay bit-exactly
// regardless of call-site reordering elsewhere.

#include <cmath>
#include <cstdint>
#include <string_view>

namespace matteblend {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Hash-combine two 64-bit values into a new stream id.
inline constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2)));
}

/// FNV-1a over bytes; stable across platforms unlike std::hash.
inline std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : base_(splitmix64(seed ^ 0xa5a5a5a5deadbeefull)), state_(base_) {}

  /// Derive an independent substream. A pure function of (seed, id): neither
  /// advances this generator nor depends on how much of it was consumed.
  Rng stream(std::uint64_t id) const { return Rng(mix_seed(base_, id)); }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of mantissa.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform over the inclusive integer range [lo, hi], unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return lo + static_cast<std::int64_t>(next_u64());  // full 2^64 span
    const std::uint64_t reject_below = (0 - range) % range;
    std::uint64_t x = next_u64();
    while (x < reject_below) x = next_u64();
    return lo + static_cast<std::int64_t>(x % range);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  /// Standard normal via Box-Muller (no cached second value).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::uint64_t base_;
  std::uint64_t state_;
};

}  // namespace matteblend
