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

/*!
 * \file estimators.hpp
 * \brief Synthetic ground-truth accuracy, minibatch-loss proxy, Kendall's tau.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "attsample/flops_model.hpp"
#include "attsample/random.hpp"
#include "attsample/search_space.hpp"

namespace attsample {

/// Parameters of acc(a) = a - b*exp(-flops/lambda) + epsilon*h(arch).
struct OracleParams {
  double a = 0.82;
  double b = 0.30;
  double lambda = 500.0;
  double epsilon = 0.02;
  std::uint64_t seed = 0;

  void check() const {
    if (!(a > 0.0 && a <= 1.0)) throw Error("oracle: need 0 < a <= 1");
    if (!(b >= 0.0 && b < a)) throw Error("oracle: need 0 <= b < a");
    if (!(lambda > 0.0)) throw Error("oracle: need lambda > 0");
    if (!(epsilon >= 0.0 && epsilon < 0.1)) throw Error("oracle: need 0 <= epsilon < 0.1");
  }
};

/// Structural perturbation h in [-1, 1]: the mean over axes of a stable
/// 64-bit hash of (seed, axis position, chosen value), each mapped affinely
/// onto [-1, 1]. Each option carries a fixed quality offset that is shared by
/// every architecture choosing it.
inline double structural_hash(std::uint64_t seed, std::span<const int> encoded) {
  if (encoded.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const int key[2] = {static_cast<int>(i), encoded[i]};
    sum += hash_to_unit(hash_combine(seed, key));
  }
  return sum / static_cast<double>(encoded.size());
}

inline double oracle_accuracy(const OracleParams& p, double mflops, std::span<const int> encoded) {
  const double acc = p.a - p.b * std::exp(-mflops / p.lambda) + p.epsilon * structural_hash(p.seed, encoded);
  return std::clamp(acc, 0.0, 1.0);
}

inline double oracle_accuracy(const OracleParams& p, const SearchSpace& space, const ArchitectureConfig& arch) {
  const auto enc = encode(space, arch);
  return oracle_accuracy(p, arch_flops(space, arch).value, enc);
}

/// log(accuracy) + N(0, sigma): the negated noisy cross-entropy of a
/// minibatch, higher is better.
inline double minibatch_loss_proxy(double accuracy, double noise_sigma, Rng& rng) {
  if (noise_sigma < 0.0) throw Error("minibatch_loss_proxy: negative noise");
  const double score = std::log(std::max(accuracy, 1e-12));
  if (noise_sigma == 0.0) return score;
  return score + std::normal_distribution<double>(0.0, noise_sigma)(rng);
}

namespace detail {

// Merge sort counting strict inversions; ties are not inversions.
template <class T>
std::uint64_t count_inversions(std::vector<T>& v, std::vector<T>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t inv = count_inversions(v, buf, lo, mid) + count_inversions(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      inv += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return inv;
}

template <class T>
std::uint64_t tied_pairs_sorted(const std::vector<T>& v) {
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < v.size();) {
    std::size_t j = i;
    while (j < v.size() && v[j] == v[i]) ++j;
    const std::uint64_t run = j - i;
    t += run * (run - 1) / 2;
    i = j;
  }
  return t;
}

}  // namespace detail

/// Kendall's tau-b (tie corrected), by Knight's O(n log n) algorithm.
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("kendall_tau: length mismatch");
  const std::size_t n = x.size();
  if (n < 2) throw Error("kendall_tau: need at least two observations");
  std::vector<std::pair<double, double>> xy(n);
  for (std::size_t i = 0; i < n; ++i) xy[i] = {x[i], y[i]};
  std::sort(xy.begin(), xy.end());

  const std::uint64_t n0 = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  std::uint64_t ties_x = 0, ties_xy = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && xy[j].first == xy[i].first) ++j;
    const std::uint64_t run = j - i;
    ties_x += run * (run - 1) / 2;
    for (std::size_t a = i; a < j;) {
      std::size_t b = a;
      while (b < j && xy[b].second == xy[a].second) ++b;
      const std::uint64_t r = b - a;
      ties_xy += r * (r - 1) / 2;
      a = b;
    }
    i = j;
  }
  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = xy[i].second;
  // Pairs tied in x are sorted by y, so they contribute no inversions.
  const std::uint64_t swaps = detail::count_inversions(ys, buf, 0, n);
  const std::uint64_t ties_y = detail::tied_pairs_sorted(ys);

  const double denom = std::sqrt(static_cast<double>(n0 - ties_x) * static_cast<double>(n0 - ties_y));
  if (denom == 0.0) throw Error("kendall_tau: undefined for constant input");
  // concordant - discordant = n0 - ties_x - ties_y + ties_xy - 2 * swaps
  const double num = static_cast<double>(n0) - static_cast<double>(ties_x) - static_cast<double>(ties_y) +
                     static_cast<double>(ties_xy) - 2.0 * static_cast<double>(swaps);
  return num / denom;
}

}  // namespace attsample
