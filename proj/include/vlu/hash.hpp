// SPDX-License-Identifier: Apache-2.0
//
// Integer-only hashing and PRNG primitives. Everything seeded in this
// project (mock provider, bootstrap, shuffles, sampling) goes through
// these so results are identical across platforms and languages.
#pragma once

#include <cstdint>
#include <string_view>

namespace vlu {

inline constexpr std::uint64_t kFnvOffset = 0xCBF29CE484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001B3ULL;

/// FNV-1a 64 over raw bytes; pass `state` to continue a running hash.
constexpr std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = kFnvOffset) noexcept {
  for (const char ch : bytes) {
    state ^= static_cast<std::uint8_t>(ch);
    state *= kFnvPrime;
  }
  return state;
}

/// splitmix64 finalizer, usable as a standalone 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  constexpr std::uint64_t next() noexcept {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  constexpr double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform on [-1, 1).
  constexpr double symmetric() noexcept { return 2.0 * uniform() - 1.0; }

  /// Uniform index in [0, n) by multiply-shift (no division, no floats).
  constexpr std::uint64_t index(std::uint64_t n) noexcept {
    __extension__ using u128 = unsigned __int128;
    return static_cast<std::uint64_t>((static_cast<u128>(next()) * n) >> 64);
  }

 private:
  std::uint64_t state_;
};

}  // namespace vlu
