#pragma once

#include <cstdint>
#include <random>

namespace gfra {

using Rng = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

// Independent generator for work item `index` under `master`. Used to give each
// Monte Carlo trial its own stream so results do not depend on scheduling.
inline Rng substream(std::uint64_t master, std::uint64_t index) {
  const std::uint64_t a = detail::splitmix64(master);
  const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(index + 0x632BE59BD9B4E019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

}  // namespace gfra
