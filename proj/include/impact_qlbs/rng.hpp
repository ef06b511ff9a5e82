#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace impact_qlbs::rng {

/// SplitMix64 finalizer, the mixing step behind all stream derivation.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent consumers of randomness. The values are stable identifiers:
/// appending a new purpose never perturbs the streams of existing ones.
enum class Stream : std::uint64_t {
  unaffected_paths = 1,
  strategy = 2,
  impact_beta = 3,
  impact_thinness = 4,
  run = 5,
};

/// Substream key for (root seed, purpose, index), derived by chaining
/// splitmix64 over the three fields. Each (purpose, index) pair owns a
/// stream that is independent of evaluation order and thread count.
inline std::uint64_t substream(std::uint64_t root, Stream purpose,
                               std::uint64_t index) noexcept {
  std::uint64_t k = splitmix64(root);
  k = splitmix64(k ^ static_cast<std::uint64_t>(purpose));
  k = splitmix64(k ^ index);
  return k;
}

inline std::mt19937_64 engine(std::uint64_t root, Stream purpose, std::uint64_t index) {
  return std::mt19937_64{substream(root, purpose, index)};
}

/// Uniform draw on [lo, hi); lo == hi yields the constant lo.
inline double uniform_halfopen(std::mt19937_64& eng, double lo, double hi) {
  if (lo == hi) return lo;
  std::uniform_real_distribution<double> dist(lo, hi);
  const double v = dist(eng);
  return v < hi ? v : std::nextafter(hi, lo);
}

}  // namespace impact_qlbs::rng
