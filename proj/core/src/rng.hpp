#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace malsig::detail {

__extension__ typedef unsigned __int128 u128;

// Fisher-Yates over mt19937_64 with Lemire's unbiased range reduction. Used
// instead of std::shuffle so splits are identical across standard libraries.
inline std::uint64_t bounded(std::mt19937_64& g, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const u128 m = static_cast<u128>(g()) * n;
    if (static_cast<std::uint64_t>(m) >= threshold) return static_cast<std::uint64_t>(m >> 64);
  }
}

template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& g) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[bounded(g, i)]);
}

}  // namespace malsig::detail
