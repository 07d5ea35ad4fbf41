#pragma once

#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace loco {

// splitmix64 finalizer; stable across platforms and runs.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) noexcept {
  return mix64(seed ^ mix64(value));
}

constexpr std::uint64_t hash_seeds(std::initializer_list<std::uint64_t> values) noexcept {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  for (auto v : values) h = hash_combine(h, v);
  return h;
}

// FNV-1a, for folding subject ids into seeds.
constexpr std::uint64_t hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace loco
