#include "meshprof/random.hpp"

#include <limits>

namespace meshprof {

std::uint64_t Rng::below(std::uint64_t n) {
  // Rejection sampling on the largest multiple of n below 2^64.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return x % n;
}

std::uint64_t hash_combine(std::uint64_t seed, std::span<const std::int64_t> values) {
  std::uint64_t h = mix64(seed);
  for (auto v : values) h = mix64(h ^ static_cast<std::uint64_t>(v));
  return h;
}

}  // namespace meshprof
