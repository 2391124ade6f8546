#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mii {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and any number of keys.
// Order matters: derive_seed(s, a, b) != derive_seed(s, b, a).
template <typename... Keys>
constexpr std::uint64_t derive_seed(std::uint64_t base, Keys... keys) {
  std::uint64_t h = mix64(base);
  ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(keys)))), ...);
  return h;
}

// FNV-1a, used to turn comparator labels into seed material.
constexpr std::uint64_t hash_label(std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream tags keep derived seeds for different purposes apart.
namespace stream {
inline constexpr std::uint64_t kIdentity = 0x1d;
inline constexpr std::uint64_t kCapture = 0xca;
inline constexpr std::uint64_t kCalibration = 0xc1;
inline constexpr std::uint64_t kComparatorNoise = 0x40;
inline constexpr std::uint64_t kRotation = 0x70;
inline constexpr std::uint64_t kPairs = 0x9a;
inline constexpr std::uint64_t kQuads = 0x4d;
inline constexpr std::uint64_t kGallery = 0x6a;
inline constexpr std::uint64_t kIndex = 0x1e;
inline constexpr std::uint64_t kRender = 0x3e;
inline constexpr std::uint64_t kMii = 0x11;
}  // namespace stream

}  // namespace mii
