// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace nurl {

// std::mt19937_64 is fully specified by the standard, but the std
// distributions are not, so the helpers below do their own conversions.
// Every random draw in the engine goes through them.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n). Rejection sampling, no modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % n;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed, a label and a list of
/// integer keys: FNV-1a over the label, then one splitmix64 round per key.
/// Streams are addressed by name, so adding a new consumer never shifts the
/// draws seen by an existing one.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::initializer_list<std::uint64_t> keys = {}) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = splitmix64(base ^ h);
  for (const std::uint64_t k : keys) s = splitmix64(s ^ splitmix64(k));
  return s;
}

inline Rng make_rng(std::uint64_t base, std::string_view label,
                    std::initializer_list<std::uint64_t> keys = {}) {
  return Rng(derive_seed(base, label, keys));
}

/// Fisher-Yates with the portable index draw.
template <typename It>
void shuffle(It first, It last, Rng& rng) {
  const auto n = last - first;
  for (auto i = n - 1; i > 0; --i) {
    const auto j = static_cast<decltype(i)>(uniform_index(rng, static_cast<std::uint64_t>(i + 1)));
    std::swap(first[i], first[j]);
  }
}

}  // namespace nurl
