// Copyright 2026 The attsample Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace attsample {

/// Base exception for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Fixed algorithm, platform independent.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// 64-bit FNV-1a over bytes.
constexpr std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Order-sensitive combination of a seed with a sequence of integers.
inline std::uint64_t hash_combine(std::uint64_t seed, std::span<const int> values) noexcept {
  std::uint64_t h = mix64(seed);
  for (int v : values) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(v)));
  return h;
}

/// Maps a 64-bit hash affinely onto [-1, 1].
inline double hash_to_unit(std::uint64_t h) noexcept {
  // Top 53 bits give an exact double in [0, 1].
  const double u = static_cast<double>(h >> 11) / static_cast<double>((1ULL << 53) - 1);
  return 2.0 * u - 1.0;
}

/// Derives an independent, named random stream from a root seed.
///
/// Every stage of an experiment draws from its own substream so that stages
/// stay reproducible in isolation (e.g. "sampler", "training", "evolution").
inline Rng substream(std::uint64_t root, std::string_view name, std::uint64_t index = 0) {
  const std::uint64_t a = mix64(root);
  const std::uint64_t b = fnv1a64(name);
  const std::uint64_t c = mix64(index ^ 0x5851f42d4c957f2dULL);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return Rng(seq);
}

/// Uniform integer in [0, n). Requires n > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

}  // namespace attsample
