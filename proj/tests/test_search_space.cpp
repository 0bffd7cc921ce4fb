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

#include <set>

#include "attsample/search_space.hpp"
#include "test_util.hpp"

namespace attsample {
namespace {

TEST(SearchSpace, DefaultSpaceMatchesTable) {
  const auto space = default_space();
  EXPECT_EQ(space.num_axes(), 28u);
  EXPECT_EQ(space.axis("mb5.width").choices, (std::vector<int>{112, 120, 128}));
  EXPECT_EQ(space.axis("resolution").choices, (std::vector<int>{192, 224, 256, 288}));
  EXPECT_EQ(space.axis("mb6.depth").choices, (std::vector<int>{3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(space.axis("mbpool.width").choices, (std::vector<int>{1792, 1984}));
  EXPECT_EQ(space.axis("stem.width").choices, (std::vector<int>{16, 24}));
  EXPECT_EQ(space.axis("mb1.width").choices, (std::vector<int>{16, 24}));
  // Expansion is searchable for stages 2-5 only.
  EXPECT_FALSE(space.find_axis("mb1.expansion"));
  EXPECT_TRUE(space.find_axis("mb2.expansion"));
  EXPECT_TRUE(space.find_axis("mb5.expansion"));
  EXPECT_FALSE(space.find_axis("mb6.expansion"));
  EXPECT_FALSE(space.find_axis("mb7.expansion"));
  EXPECT_EQ(space.axes().front().name, "resolution");
  EXPECT_EQ(space.axes().back().name, "mbpool.width");

  const auto& L = space.layout();
  ASSERT_EQ(L.stages.size(), 7u);
  const std::vector<int> strides{1, 2, 2, 2, 1, 2, 1};
  const std::vector<bool> se{false, false, true, false, true, true, true};
  for (std::size_t s = 0; s < 7; ++s) {
    EXPECT_EQ(L.stages[s].stride, strides[s]);
    EXPECT_EQ(L.stages[s].se, se[s]);
  }
  EXPECT_EQ(L.stages[0].expansion.fixed, 1);
  EXPECT_EQ(L.stages[5].expansion.fixed, 6);
  EXPECT_EQ(L.stem_stride, 2);
}

TEST(SearchSpace, AxisOrderIsStable) {
  const auto a = default_space();
  const auto b = default_space();
  ASSERT_EQ(a.num_axes(), b.num_axes());
  for (std::size_t i = 0; i < a.num_axes(); ++i) EXPECT_EQ(a.axes()[i].name, b.axes()[i].name);
  EXPECT_EQ(a.axes()[2].name, "mb1.width");
  EXPECT_EQ(a.axes()[5].name, "mb2.width");
  EXPECT_EQ(a.axes()[8].name, "mb2.expansion");
}

TEST(SearchSpace, RejectsBadAxes) {
  EXPECT_THROW(SearchSpace({ChoiceAxis{"x", {}}}), Error);
  EXPECT_THROW(SearchSpace({ChoiceAxis{"x", {3, 1}}}), Error);
  EXPECT_THROW(SearchSpace({ChoiceAxis{"x", {1, 1}}}), Error);
  auto t = default_template();
  t.stages[0].expansion = {{1, 2}, false};
  EXPECT_THROW(SearchSpace::from_template(t), Error);
}

TEST(SearchSpace, Validate) {
  const auto space = default_space();
  EXPECT_TRUE(validate(space, smallest_arch(space)).empty());
  EXPECT_TRUE(validate(space, largest_arch(space)).empty());

  ArchitectureConfig short_arch{std::vector<int>(27, 0)};
  auto v = validate(space, short_arch);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].message.find("length mismatch"), std::string::npos);

  auto bad = smallest_arch(space);
  bad.choice_indices[0] = 4;
  v = validate(space, bad);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].axis, "resolution");
  EXPECT_EQ(v[0].message, "resolution index out of range");
  EXPECT_EQ(v[0].index, 4);

  bad.choice_indices[3] = -1;
  EXPECT_EQ(validate(space, bad).size(), 2u);
  EXPECT_THROW(encode(space, bad), Error);
}

TEST(SearchSpace, UniformSampleSingleChoice) {
  SearchSpace one({ChoiceAxis{"x", {7}}});
  Rng rng(3);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(uniform_sample(one, rng).choice_indices, std::vector<int>{0});
  EXPECT_EQ(smallest_arch(one), largest_arch(one));
}

TEST(SearchSpace, UniformSampleFrequencies) {
  const auto space = default_space();
  Rng rng(11);
  int hits = 0;
  constexpr int kDraws = 100000;
  for (int i = 0; i < kDraws; ++i) {
    auto a = uniform_sample(space, rng);
    ASSERT_TRUE(is_valid(space, a));
    hits += a.choice_indices[0] == 0;
  }
  EXPECT_NEAR(static_cast<double>(hits) / kDraws, 0.25, 0.01);
}

TEST(SearchSpace, UniformSampleDeterministic) {
  const auto space = default_space();
  Rng a(99), b(99);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(uniform_sample(space, a), uniform_sample(space, b));
}

TEST(SearchSpace, SmallestLargest) {
  const auto space = default_space();
  const auto small = resolve(space, smallest_arch(space));
  const auto large = resolve(space, largest_arch(space));
  EXPECT_EQ(small.resolution, 192);
  EXPECT_EQ(large.resolution, 288);
  EXPECT_EQ(large.mbpool_width, 1984);
  EXPECT_EQ(small.mbpool_width, 1792);
  EXPECT_EQ(large.stages[5].depth, 8);
  EXPECT_EQ(large.stages[5].expansion, 6);
  EXPECT_EQ(small.stages[0].expansion, 1);
}

TEST(SearchSpace, EncodeValues) {
  const auto space = default_space();
  const auto lo = encode(space, smallest_arch(space));
  const auto hi = encode(space, largest_arch(space));
  ASSERT_EQ(lo.size(), 28u);
  EXPECT_EQ(lo[0], 192);
  EXPECT_EQ(hi[0], 288);
  for (std::size_t i = 0; i < lo.size(); ++i) EXPECT_GE(hi[i], lo[i]);
}

TEST(SearchSpace, EncodeInjectiveOnSubspace) {
  // Brute force over every member of a 3-axis subspace.
  const auto space = testing_util::reduced_space({"resolution", "mb5.width", "mb6.depth"});
  ASSERT_EQ(space.num_axes(), 3u);
  std::set<std::vector<int>> seen;
  std::size_t members = 0;
  testing_util::for_each_arch(space, [&](const ArchitectureConfig& a) {
    ++members;
    auto e = encode(space, a);
    EXPECT_TRUE(seen.insert(e).second);
    EXPECT_EQ(decode(space, e), a);
  });
  EXPECT_EQ(members, 4u * 3u * 6u);
}

TEST(SearchSpace, Cardinality) {
  EXPECT_EQ(space_cardinality(default_space()), boost::multiprecision::cpp_int("440301256704"));
  EXPECT_EQ(space_cardinality(SearchSpace({ChoiceAxis{"x", {1}}})), 1);
  EXPECT_EQ(space_cardinality(SearchSpace({ChoiceAxis{"a", {0, 1}}, ChoiceAxis{"b", {0, 1}}})), 4);
}

TEST(SearchSpace, CoupledStemOption) {
  auto t = default_template();
  t.couple_stem_mb1 = true;
  const auto space = SearchSpace::from_template(t);
  EXPECT_EQ(space.num_axes(), 27u);
  EXPECT_FALSE(space.find_axis("mb1.width"));
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    auto net = resolve(space, uniform_sample(space, rng));
    EXPECT_EQ(net.stem_width, net.stages[0].width);
  }
  auto j = arch_to_json(space, largest_arch(space));
  j["stages"][0]["width"] = 16;
  EXPECT_THROW(arch_from_json(space, j), Error);
}

TEST(SearchSpace, JsonRoundTrip) {
  const auto space = default_space();
  Rng rng(17);
  for (int i = 0; i < 200; ++i) {
    auto a = uniform_sample(space, rng);
    auto j = arch_to_json(space, a);
    EXPECT_EQ(arch_from_json(space, nlohmann::json::parse(j.dump())), a);
  }
  auto j = arch_to_json(space, smallest_arch(space));
  EXPECT_EQ(j["resolution"], 192);
  EXPECT_EQ(j["stages"].size(), 7u);
  EXPECT_EQ(j["stages"][0]["expansion"], 1);
  EXPECT_EQ(j["mbpool_width"], 1792);
}

TEST(SearchSpace, JsonRejectsInvalid) {
  const auto space = default_space();
  auto j = arch_to_json(space, smallest_arch(space));
  auto bad_value = j;
  bad_value["resolution"] = 200;
  EXPECT_THROW(arch_from_json(space, bad_value), Error);
  auto bad_fixed = j;
  bad_fixed["stages"][5]["expansion"] = 4;
  EXPECT_THROW(arch_from_json(space, bad_fixed), Error);
  auto missing = j;
  missing.erase("mbpool_width");
  EXPECT_THROW(arch_from_json(space, missing), Error);
}

}  // namespace
}  // namespace attsample
