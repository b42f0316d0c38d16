#ifndef MDR_RNG_HPP_
#define MDR_RNG_HPP_

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mdr {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Folds a sequence of words into one seed: h <- mix64(h ^ w) per word,
// starting from h = mix64(0).
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = mix64(0);
  for (auto w : words) h = mix64(h ^ w);
  return h;
}

// Uniform in [0, 1) with 53 random bits. Portable across standard libraries,
// unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n) by rejection sampling. Portable.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

}  // namespace mdr

#endif  // MDR_RNG_HPP_
