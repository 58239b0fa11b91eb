#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace aord {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Named child seeds of one master seed. Streams used by the harness:
// "data", "init", "diffusion-train", "diffusion-sample", "eval".
constexpr std::uint64_t stream_seed(std::uint64_t master, std::string_view name,
                                    std::uint64_t index = 0) {
  return mix64(mix64(master ^ fnv1a(name)) + index);
}

inline Rng make_rng(std::uint64_t master, std::string_view name, std::uint64_t index = 0) {
  return Rng(stream_seed(master, name, index));
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace aord
