#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tpst {

// All randomness in the library flows from one master seed through named
// sub-streams, so that replications and pipeline stages can run in any order
// (or in parallel) without perturbing each other:
//
//   sub_seed = splitmix64(master ^ fnv1a(label) ^ splitmix64(index))
//
// Reruns with the same master seed are bit-identical on the same platform.

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derive the sub-seed for stage `label`, occurrence `index` (replication
/// number, fold number, ...) from a master seed.
inline std::uint64_t sub_seed(std::uint64_t master, std::string_view label,
                              std::uint64_t index = 0) {
  return splitmix64(master ^ fnv1a(label) ^ splitmix64(index));
}

inline std::mt19937_64 make_rng(std::uint64_t master, std::string_view label,
                                std::uint64_t index = 0) {
  return std::mt19937_64(sub_seed(master, label, index));
}

}  // namespace tpst
