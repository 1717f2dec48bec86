#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mtsafe {

using Rng = std::mt19937_64;

// FNV-1a, used only to turn stream names into seed material.
constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 14695981039346656037ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

/// Independent generator for the named substream of a run seed. Components
/// draw from their own substream ("mcmc", "noise.main", ...) so one can be
/// re-seeded without shifting the others.
inline Rng make_stream(std::uint64_t seed, std::string_view name) {
  const std::uint64_t h = hash_name(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

inline Rng make_stream(std::uint64_t seed, std::string_view name, std::uint64_t index) {
  return make_stream(seed ^ (index * 0x9E3779B97F4A7C15ULL), name);
}

}  // namespace mtsafe
