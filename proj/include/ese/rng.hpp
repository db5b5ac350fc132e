#pragma once

// Counter-based random streams.
//
// Every draw is a pure function of (key, index), so a value never depends on
// how many other values were drawn before it. Keys are derived from a base
// seed and a purpose name ("weights", "noise", "design", ...) which keeps the
// substreams independent: adding a consumer never shifts another stream.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>

namespace ese {

using Seed = std::uint64_t;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t mix(std::uint64_t a, std::uint64_t b) noexcept {
  return splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL));
}

/// FNV-1a, 64 bit.
inline constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of a named substream of `base`.
inline constexpr Seed substream(Seed base, std::string_view purpose) noexcept {
  return mix(base, fnv1a(purpose));
}

inline constexpr Seed substream(Seed base, std::string_view purpose, std::uint64_t k) noexcept {
  return mix(substream(base, purpose), k);
}

/// A keyed stream of uniforms and standard normals indexed by position.
class CounterStream {
 public:
  constexpr explicit CounterStream(Seed key) noexcept : key_(key) {}

  constexpr Seed key() const noexcept { return key_; }

  constexpr std::uint64_t bits(std::uint64_t index) const noexcept { return mix(key_, index); }

  /// Uniform on [0, 1) with 53 bits of resolution.
  constexpr double uniform(std::uint64_t index) const noexcept {
    return static_cast<double>(bits(index) >> 11) * 0x1.0p-53;
  }

  /// Standard normal at `index`. Box-Muller on the pair index / 2, so
  /// neighbouring indices share one transform.
  double normal(std::uint64_t index) const noexcept {
    auto [z0, z1] = normal_pair(index >> 1);
    return (index & 1U) ? z1 : z0;
  }

  /// Fills out[k] = normal(first + k).
  void fill_normal(std::uint64_t first, std::span<double> out) const noexcept {
    std::size_t k = 0;
    std::uint64_t idx = first;
    if ((idx & 1U) && k < out.size()) {
      out[k++] = normal(idx++);
    }
    for (; k + 1 < out.size(); k += 2, idx += 2) {
      auto [z0, z1] = normal_pair(idx >> 1);
      out[k] = z0;
      out[k + 1] = z1;
    }
    if (k < out.size()) out[k] = normal(idx);
  }

 private:
  struct Pair {
    double z0;
    double z1;
  };

  Pair normal_pair(std::uint64_t pair) const noexcept {
    const std::uint64_t a = mix(key_, 2 * pair);
    const std::uint64_t b = mix(key_, 2 * pair + 1);
    // u1 in (0, 1] keeps the log finite.
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  Seed key_;
};

}  // namespace ese
