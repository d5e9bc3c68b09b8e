#ifndef DBH_RANDOM_HPP
#define DBH_RANDOM_HPP

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dbh {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent stream seeds.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for the stream identified by (base, ids...). Schedule independent.
[[nodiscard]] inline std::uint64_t stream_seed(std::uint64_t base,
                                               std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = mix_seed(base);
  for (const auto id : ids) s = mix_seed(s ^ mix_seed(id + 0x632be59bd9b4e019ULL));
  return s;
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
[[nodiscard]] inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

[[nodiscard]] inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n) by rejection; n > 0.
[[nodiscard]] inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Standard normal via Box-Muller; platform independent unlike std::normal_distribution.
[[nodiscard]] double standard_normal(Rng& rng);

}  // namespace dbh

#endif  // DBH_RANDOM_HPP
