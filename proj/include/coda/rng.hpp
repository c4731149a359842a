#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace coda {

/// SplitMix64 finalizer. Used to fan a single run seed out into
/// independent streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Counter-based stream derivation:
///   seed(root, stage, a, b) = splitmix(splitmix(splitmix(root ^ fnv(stage)) ^ a) ^ b)
/// Every stage/class/trajectory gets its own stream, independent of the
/// order in which streams are consumed.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stage, std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
  std::uint64_t s = splitmix64(root ^ fnv1a(stage));
  s = splitmix64(s ^ a);
  return splitmix64(s ^ b);
}

/// Deterministic random source. The distributions are implemented here
/// rather than through <random> distributions, whose output is
/// implementation-defined; mt19937_64 itself is fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the result unbiased.
    const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coda
