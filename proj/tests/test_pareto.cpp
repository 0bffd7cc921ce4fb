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

#include <gtest/gtest.h>

#include <sstream>

#include "attsample/pareto.hpp"
#include "test_util.hpp"

namespace attsample {
namespace {

using testing_util::brute_best;
using testing_util::brute_worst;

std::vector<EvaluatedPoint> pts(std::initializer_list<std::pair<double, double>> xs) {
  std::vector<EvaluatedPoint> out;
  std::uint64_t id = 0;
  for (auto [f, s] : xs) out.push_back({id++, f, s});
  return out;
}

std::vector<std::uint64_t> ids(const std::vector<EvaluatedPoint>& v) {
  std::vector<std::uint64_t> out;
  for (const auto& p : v) out.push_back(p.arch_id);
  return out;
}

TEST(Pareto, ThreePointExample) {
  auto p = pts({{100, 0.70}, {200, 0.75}, {300, 0.73}});
  EXPECT_EQ(ids(best_pareto(p)), (std::vector<std::uint64_t>{0, 1}));
  EXPECT_EQ(ids(worst_pareto(p)), (std::vector<std::uint64_t>{0, 2}));
}

TEST(Pareto, SinglePoint) {
  auto p = pts({{150, 0.5}});
  EXPECT_EQ(best_pareto(p).size(), 1u);
  EXPECT_EQ(worst_pareto(p).size(), 1u);
}

TEST(Pareto, EqualScoresKeepOnlyCheapestOnBestFront) {
  auto p = pts({{300, 0.6}, {100, 0.6}, {200, 0.6}});
  EXPECT_EQ(ids(best_pareto(p)), std::vector<std::uint64_t>{1});
  // Mirror: only the costliest is on the worst front.
  EXPECT_EQ(ids(worst_pareto(p)), std::vector<std::uint64_t>{0});
}

TEST(Pareto, ExactDuplicatesKept) {
  auto p = pts({{100, 0.6}, {100, 0.6}, {100, 0.6}});
  EXPECT_EQ(best_pareto(p).size(), 3u);
  EXPECT_EQ(worst_pareto(p).size(), 3u);
}

TEST(Pareto, PointOnBothFronts) {
  // The cheapest point, worse than everything costlier, sits on both fronts.
  auto p = pts({{50, 0.4}, {100, 0.8}, {200, 0.6}});
  auto b = ids(best_pareto(p));
  auto w = ids(worst_pareto(p));
  EXPECT_NE(std::find(b.begin(), b.end(), 0u), b.end());
  EXPECT_NE(std::find(w.begin(), w.end(), 0u), w.end());
}

TEST(Pareto, EmptyInputThrows) {
  std::vector<EvaluatedPoint> none;
  EXPECT_THROW(best_pareto(none), Error);
  EXPECT_THROW(worst_pareto(none), Error);
}

TEST(Pareto, MatchesBruteForceOnRandomSets) {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, trial < 100 ? 40 : 600);
    // Coarse integer grids force plenty of ties.
    const int grid = 1 + static_cast<int>(uniform_index(rng, 30));
    std::vector<EvaluatedPoint> p(n);
    for (std::size_t i = 0; i < n; ++i)
      p[i] = {i, 100.0 + static_cast<double>(uniform_index(rng, grid)), static_cast<double>(uniform_index(rng, grid)) / grid};
    EXPECT_EQ(best_pareto_indices(p), brute_best(p));
    EXPECT_EQ(worst_pareto_indices(p), brute_worst(p));
  }
}

TEST(Pareto, BestFrontIsStrictlyIncreasingWithoutDuplicates) {
  Rng rng(7);
  std::vector<EvaluatedPoint> p(500);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = {i, 200 + 1800 * uniform01(rng), uniform01(rng)};
  auto best = best_pareto(p);
  std::sort(best.begin(), best.end(), [](auto& a, auto& b) { return a.flops < b.flops; });
  for (std::size_t i = 1; i < best.size(); ++i) EXPECT_GT(best[i].score, best[i - 1].score);
  auto worst = worst_pareto(p);
  std::sort(worst.begin(), worst.end(), [](auto& a, auto& b) { return a.flops < b.flops; });
  for (std::size_t i = 1; i < worst.size(); ++i) EXPECT_GT(worst[i].score, worst[i - 1].score);
  // Cheapest point is on the best front.
  auto cheapest = std::min_element(p.begin(), p.end(), [](auto& a, auto& b) { return a.flops < b.flops; });
  EXPECT_EQ(best.front().arch_id, cheapest->arch_id);
}

TEST(SelectAttentive, ArgmaxArgmin) {
  std::vector<Candidate> c{{0.6, 300, {1}}, {0.8, 300, {2}}, {0.7, 300, {3}}};
  EXPECT_EQ(select_attentive(c, SelectMode::Best), 1u);
  EXPECT_EQ(select_attentive(c, SelectMode::Worst), 0u);
  std::vector<Candidate> one{{0.1, 10, {}}};
  EXPECT_EQ(select_attentive(one, SelectMode::Best), 0u);
  EXPECT_EQ(select_attentive(one, SelectMode::Worst), 0u);
  std::vector<Candidate> none;
  EXPECT_THROW(select_attentive(none, SelectMode::Best), Error);
}

TEST(SelectAttentive, TieBreaks) {
  std::vector<Candidate> c{{0.5, 310, {1, 2}}, {0.5, 305, {9, 9}}, {0.5, 305, {3, 4}}, {0.4, 300, {0}}};
  EXPECT_EQ(select_attentive(c, SelectMode::Best), 2u);
  std::vector<Candidate> d{{0.5, 305, {3, 4}}, {0.5, 305, {3, 4}}};
  EXPECT_EQ(select_attentive(d, SelectMode::Worst), 0u);
}

TEST(SelectAttentive, InvariantUnderMonotoneTransform) {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    std::vector<Candidate> c(1 + uniform_index(rng, 50));
    for (auto& x : c) x = {uniform01(rng), 300.0 + uniform_index(rng, 5), {static_cast<int>(uniform_index(rng, 3))}};
    auto g = c;
    for (auto& x : g) x.score = std::exp(3 * x.score) - 7;
    EXPECT_EQ(select_attentive(c, SelectMode::Best), select_attentive(g, SelectMode::Best));
    EXPECT_EQ(select_attentive(c, SelectMode::Worst), select_attentive(g, SelectMode::Worst));
  }
}

TEST(BucketStats, OnePointPerBucket) {
  auto p = pts({{110, 0.3}, {160, 0.4}});
  const std::vector<double> edges{100, 150, 200, 250};
  auto s = bucket_stats(p, edges);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_EQ(s[0].min, 0.3);
  EXPECT_EQ(s[0].q1, 0.3);
  EXPECT_EQ(s[0].median, 0.3);
  EXPECT_EQ(s[0].q3, 0.3);
  EXPECT_EQ(s[0].max, 0.3);
  EXPECT_EQ(s[1].median, 0.4);
  EXPECT_EQ(s[2].count, 0u);
}

TEST(BucketStats, FiveNumbers) {
  auto p = pts({{10, 3}, {11, 1}, {12, 5}, {13, 2}, {14, 4}});
  const std::vector<double> edges{0, 100};
  auto s = bucket_stats(p, edges);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].min, 1);
  EXPECT_EQ(s[0].q1, 2);
  EXPECT_EQ(s[0].median, 3);
  EXPECT_EQ(s[0].q3, 4);
  EXPECT_EQ(s[0].max, 5);
  EXPECT_EQ(s[0].count, 5u);
}

TEST(BucketStats, MatchesSortOracle) {
  Rng rng(99);
  std::vector<EvaluatedPoint> p(1000);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = {i, 200 + 1800 * uniform01(rng), uniform01(rng)};
  const auto edges = uniform_edges(200, 2000, 50);
  auto s = bucket_stats(p, edges);
  ASSERT_EQ(s.size(), edges.size() - 1);
  for (std::size_t b = 0; b < s.size(); ++b) {
    std::vector<double> in;
    for (const auto& x : p)
      if (x.flops >= edges[b] && x.flops < edges[b + 1]) in.push_back(x.score);
    ASSERT_EQ(s[b].count, in.size());
    if (in.empty()) continue;
    auto five = testing_util::naive_five_numbers(in);
    EXPECT_EQ(s[b].min, five[0]);
    EXPECT_EQ(s[b].q1, five[1]);
    EXPECT_EQ(s[b].median, five[2]);
    EXPECT_EQ(s[b].q3, five[3]);
    EXPECT_EQ(s[b].max, five[4]);
  }
}

TEST(BucketStats, RejectsUnsortedEdges) {
  auto p = pts({{10, 1}});
  const std::vector<double> edges{0, 10, 10};
  EXPECT_THROW(bucket_stats(p, edges), Error);
}

TEST(BucketStats, CsvLayout) {
  auto p = pts({{110, 0.5}});
  const std::vector<double> edges{100, 150, 200};
  std::ostringstream os;
  write_bucket_csv(os, bucket_stats(p, edges));
  EXPECT_EQ(os.str(),
            "bucket_lo,bucket_hi,min,q1,median,q3,max,count\n"
            "100,150,0.5,0.5,0.5,0.5,0.5,1\n"
            "150,200,,,,,,0\n");
}

}  // namespace
}  // namespace attsample
