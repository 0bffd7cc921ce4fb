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
 * \file pareto.hpp
 * \brief Best/worst Pareto fronts over (FLOPs, score) and attentive selection.
 *
 * Best front: points not dominated by a cheaper-or-equal, better-or-equal
 * point that is strictly better in one coordinate. Worst front: the mirror
 * image; points such that no costlier-or-equal point is worse-or-equal with
 * a strict difference. Exact duplicates are kept on either front.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include "attsample/random.hpp"

namespace attsample {

struct EvaluatedPoint {
  std::uint64_t arch_id = 0;
  double flops = 0.0;  // MFLOPs
  double score = 0.0;  // higher is better
};

struct FrontReport {
  std::vector<EvaluatedPoint> best_front;
  std::vector<EvaluatedPoint> worst_front;
};

/// Indices (ascending) of the best-front points.
inline std::vector<std::size_t> best_pareto_indices(std::span<const EvaluatedPoint> pts) {
  if (pts.empty()) throw Error("best_pareto: empty input");
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pts[a].flops < pts[b].flops; });
  std::vector<std::size_t> keep;
  double best_cheaper = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_max = -std::numeric_limits<double>::infinity();
    while (j < order.size() && pts[order[j]].flops == pts[order[i]].flops) group_max = std::max(group_max, pts[order[j++]].score);
    for (std::size_t g = i; g < j; ++g) {
      const double s = pts[order[g]].score;
      if (s == group_max && s > best_cheaper) keep.push_back(order[g]);
    }
    best_cheaper = std::max(best_cheaper, group_max);
    i = j;
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

inline std::vector<std::size_t> worst_pareto_indices(std::span<const EvaluatedPoint> pts) {
  if (pts.empty()) throw Error("worst_pareto: empty input");
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pts[a].flops > pts[b].flops; });
  std::vector<std::size_t> keep;
  double worst_costlier = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double group_min = std::numeric_limits<double>::infinity();
    while (j < order.size() && pts[order[j]].flops == pts[order[i]].flops) group_min = std::min(group_min, pts[order[j++]].score);
    for (std::size_t g = i; g < j; ++g) {
      const double s = pts[order[g]].score;
      if (s == group_min && s < worst_costlier) keep.push_back(order[g]);
    }
    worst_costlier = std::min(worst_costlier, group_min);
    i = j;
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

namespace detail {
inline std::vector<EvaluatedPoint> gather(std::span<const EvaluatedPoint> pts, const std::vector<std::size_t>& idx) {
  std::vector<EvaluatedPoint> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(pts[i]);
  return out;
}
}  // namespace detail

inline std::vector<EvaluatedPoint> best_pareto(std::span<const EvaluatedPoint> pts) {
  return detail::gather(pts, best_pareto_indices(pts));
}

inline std::vector<EvaluatedPoint> worst_pareto(std::span<const EvaluatedPoint> pts) {
  return detail::gather(pts, worst_pareto_indices(pts));
}

inline FrontReport front_report(std::span<const EvaluatedPoint> pts) { return {best_pareto(pts), worst_pareto(pts)}; }

enum class SelectMode { Best, Worst };

/// One scored candidate of a same-bin draw. `encoding` breaks exact ties.
struct Candidate {
  double score = 0.0;
  double flops = 0.0;
  std::vector<int> encoding;
};

/// Argmax (Best) / argmin (Worst) score. Ties go to lower FLOPs, then the
/// lexicographically smaller encoding, then the lower index.
inline std::size_t select_attentive(std::span<const Candidate> cands, SelectMode mode) {
  if (cands.empty()) throw Error("select_attentive: no candidates");
  std::size_t pick = 0;
  for (std::size_t i = 1; i < cands.size(); ++i) {
    const auto& c = cands[i];
    const auto& p = cands[pick];
    const bool better = mode == SelectMode::Best ? c.score > p.score : c.score < p.score;
    if (better) {
      pick = i;
    } else if (c.score == p.score) {
      if (c.flops < p.flops || (c.flops == p.flops && c.encoding < p.encoding)) pick = i;
    }
  }
  return pick;
}

struct BucketStats {
  double lo = 0.0;
  double hi = 0.0;
  double min = std::numeric_limits<double>::quiet_NaN();
  double q1 = std::numeric_limits<double>::quiet_NaN();
  double median = std::numeric_limits<double>::quiet_NaN();
  double q3 = std::numeric_limits<double>::quiet_NaN();
  double max = std::numeric_limits<double>::quiet_NaN();
  std::size_t count = 0;
};

/// Quantile of sorted data by linear interpolation between order statistics
/// (position p*(n-1)).
inline double interpolated_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error("quantile of empty data");
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

/// Five-number summaries of scores per bucket [edges[i], edges[i+1]).
/// Points outside all buckets are ignored.
inline std::vector<BucketStats> bucket_stats(std::span<const EvaluatedPoint> pts, std::span<const double> edges) {
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw Error("bucket_stats: edges must be strictly increasing");
  std::vector<BucketStats> out;
  if (edges.size() < 2) return out;
  std::vector<std::vector<double>> scores(edges.size() - 1);
  for (const auto& p : pts) {
    auto it = std::upper_bound(edges.begin(), edges.end(), p.flops);
    if (it == edges.begin() || it == edges.end()) continue;
    scores[(it - edges.begin()) - 1].push_back(p.score);
  }
  for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
    BucketStats s;
    s.lo = edges[b];
    s.hi = edges[b + 1];
    auto& v = scores[b];
    s.count = v.size();
    if (!v.empty()) {
      std::sort(v.begin(), v.end());
      s.min = v.front();
      s.max = v.back();
      s.q1 = interpolated_quantile(v, 0.25);
      s.median = interpolated_quantile(v, 0.5);
      s.q3 = interpolated_quantile(v, 0.75);
    }
    out.push_back(s);
  }
  return out;
}

inline std::vector<double> uniform_edges(double lo, double hi, double width) {
  std::vector<double> e;
  for (double x = lo; x < hi + width * 0.5; x += width) e.push_back(x);
  return e;
}

inline void write_bucket_csv(std::ostream& os, std::span<const BucketStats> stats) {
  os << "bucket_lo,bucket_hi,min,q1,median,q3,max,count\n";
  for (const auto& s : stats) {
    os << s.lo << ',' << s.hi << ',';
    if (s.count) {
      os << s.min << ',' << s.q1 << ',' << s.median << ',' << s.q3 << ',' << s.max;
    } else {
      os << ",,,,";
    }
    os << ',' << s.count << '\n';
  }
}

inline void write_front_csv(std::ostream& os, const FrontReport& r) {
  os << "front,arch_id,flops,score\n";
  for (const auto& p : r.best_front) os << "best," << p.arch_id << ',' << p.flops << ',' << p.score << '\n';
  for (const auto& p : r.worst_front) os << "worst," << p.arch_id << ',' << p.flops << ',' << p.score << '\n';
}

}  // namespace attsample
