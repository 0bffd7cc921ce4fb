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

#include <numeric>

#include "attsample/flops_model.hpp"
#include "test_util.hpp"

namespace attsample {
namespace {

TEST(ConvFlops, HandValues) {
  EXPECT_EQ(conv_flops(1, 1, 1, 1, 1, 1), 1u);
  EXPECT_EQ(conv_flops(3, 16, 3, 96, 96, 1), 3981312u);    // 96*96*3*16*9
  EXPECT_EQ(conv_flops(16, 16, 3, 96, 96, 16), 1327104u);  // 96*96*1*16*9
}

TEST(ConvFlops, Errors) {
  EXPECT_THROW(conv_flops(16, 16, 3, 96, 96, 3), Error);
  EXPECT_THROW(conv_flops(0, 16, 3, 96, 96, 1), Error);
  EXPECT_THROW(conv_flops(16, 16, 3, -1, 96, 1), Error);
}

TEST(MbconvFlops, ExpansionOneSkipsExpand) {
  StageConfig st{16, 1, 3, 1, 1, false};
  std::vector<Layer> layers;
  visit_mbconv(st, 16, 96, 1, [&](const Layer& l) { layers.push_back(l); });
  for (const auto& l : layers) EXPECT_NE(l.kind, LayerKind::Expand);
  ASSERT_EQ(layers.size(), 2u);
}

TEST(MbconvFlops, SmallestFirstStage) {
  // dw 96*96*16*9 + project 16*16*96*96
  auto r = mbconv_flops(StageConfig{16, 1, 3, 1, 1, false}, 16, 96, 1);
  EXPECT_EQ(r.macs, 1327104u + 2359296u);
  EXPECT_EQ(r.macs, 3686400u);
  EXPECT_EQ(r.out_ch, 16);
  EXPECT_EQ(r.out_hw, 96);
}

TEST(MbconvFlops, DepthAdditivity) {
  for (bool se : {false, true}) {
    StageConfig a{40, 3, 5, 4, 2, se};
    StageConfig b = a;
    b.depth = 4;
    const auto ra = mbconv_flops(a, 24, 48, 2);
    const auto rb = mbconv_flops(b, 24, 48, 2);
    // One extra stride-1 block: 40 -> 40 channels at the output resolution.
    const auto extra = mbconv_flops(StageConfig{40, 1, 5, 4, 1, se}, 40, ra.out_hw, 1);
    EXPECT_EQ(rb.macs, ra.macs + extra.macs);
    EXPECT_EQ(ra.out_hw, 24);
  }
}

TEST(MbconvFlops, SeAndStride) {
  std::vector<Layer> layers;
  auto r = visit_mbconv(StageConfig{32, 1, 3, 4, 2, true}, 24, 47, 2, [&](const Layer& l) { layers.push_back(l); });
  EXPECT_EQ(r.out_hw, 24);  // ceil(47 / 2)
  ASSERT_EQ(layers.size(), 5u);
  EXPECT_EQ(layers[0].kind, LayerKind::Expand);
  EXPECT_EQ(layers[0].macs, conv_flops(24, 96, 1, 47, 47));
  EXPECT_EQ(layers[1].macs, conv_flops(96, 96, 3, 24, 24, 96));
  EXPECT_EQ(layers[2].macs, 96u * 24u);  // squeeze to round(96 / 4)
  EXPECT_EQ(layers[3].macs, 24u * 96u);
  EXPECT_EQ(se_channels(2), 1);
  EXPECT_EQ(se_channels(6), 2);  // lround(1.5)
}

TEST(ArchFlops, Anchors) {
  const auto space = default_space();
  const double small = arch_flops(space, smallest_arch(space)).value;
  const double large = arch_flops(space, largest_arch(space)).value;
  EXPECT_GE(small, 203 * 0.9);
  EXPECT_LE(small, 203 * 1.1);
  EXPECT_GE(large, 1939 * 0.9);
  EXPECT_LE(large, 1939 * 1.1);
  // Frozen values of this counting convention.
  EXPECT_NEAR(small, 198.468224, 1e-9);
  EXPECT_NEAR(large, 1923.52192, 1e-9);
}

TEST(ArchFlops, BreakdownSumsToTotal) {
  const auto space = default_space();
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    auto a = uniform_sample(space, rng);
    auto layers = flops_breakdown(space, a);
    std::uint64_t sum = 0;
    for (const auto& l : layers) sum += l.macs;
    EXPECT_EQ(static_cast<double>(sum) / 1e6, arch_flops(space, a).value);
    EXPECT_EQ(layers.front().kind, LayerKind::Stem);
    EXPECT_EQ(layers.back().kind, LayerKind::Classifier);
  }
}

TEST(ArchFlops, StemAndHeadTerms) {
  const auto space = default_space();
  auto layers = flops_breakdown(space, smallest_arch(space));
  EXPECT_EQ(layers.front().macs, 3981312u);
  EXPECT_EQ(layers.front().out_hw, 96);
  const auto& cls = layers.back();
  EXPECT_EQ(cls.macs, 1792u * 1000u);
  const auto& proj = layers[layers.size() - 2];
  EXPECT_EQ(proj.kind, LayerKind::FeatureProj);
  EXPECT_EQ(proj.macs, 216u * 6u * 1792u);
  const auto& head = layers[layers.size() - 3];
  EXPECT_EQ(head.kind, LayerKind::HeadExpand);
  EXPECT_EQ(head.out_hw, 6);
  EXPECT_EQ(head.name(), "head_expand");
  EXPECT_EQ(layers[1].name(), "mb1.b0.depthwise");
}

TEST(ArchFlops, MonotoneUnderSingleAxisIncrements) {
  const auto space = default_space();
  Rng rng(2024);
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    auto a = uniform_sample(space, rng);
    const std::size_t axis = uniform_index(rng, space.num_axes());
    if (a.choice_indices[axis] + 1 >= static_cast<int>(space.axes()[axis].size())) a.choice_indices[axis] -= 1;
    auto b = a;
    b.choice_indices[axis] += 1;
    violations += arch_flops(space, b) < arch_flops(space, a);
  }
  EXPECT_EQ(violations, 0);
}

TEST(ArchFlops, SmallestLargestAreUniqueExtremesOnSubspace) {
  const auto space = testing_util::reduced_space({"resolution", "mb2.expansion", "mb4.depth", "mb7.kernel"});
  const auto lo = arch_flops(space, smallest_arch(space));
  const auto hi = arch_flops(space, largest_arch(space));
  int at_lo = 0, at_hi = 0;
  testing_util::for_each_arch(space, [&](const ArchitectureConfig& a) {
    const auto f = arch_flops(space, a);
    EXPECT_GE(f, lo);
    EXPECT_LE(f, hi);
    at_lo += f == lo;
    at_hi += f == hi;
  });
  EXPECT_EQ(at_lo, 1);
  EXPECT_EQ(at_hi, 1);
}

TEST(ArchFlops, PositiveEverywhere) {
  const auto space = default_space();
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) EXPECT_GT(arch_flops(space, uniform_sample(space, rng)).value, 0.0);
}

TEST(ArchFlops, GenericSpaceHasNoLayout) {
  SearchSpace bare({ChoiceAxis{"x", {1, 2}}});
  EXPECT_THROW(arch_flops(bare, smallest_arch(bare)), Error);
}

}  // namespace
}  // namespace attsample
