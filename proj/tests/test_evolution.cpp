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

#include "attsample/estimators.hpp"
#include "attsample/evolution.hpp"
#include "test_util.hpp"

namespace attsample {
namespace {

class Evo : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    space_ = new SearchSpace(default_space());
    tables_ = new SamplerTables(build_tables(*space_, 1000000, FlopsBinning(25), 42));
  }
  static void TearDownTestSuite() {
    delete tables_;
    delete space_;
  }

  static ScoreFn noiseless() {
    OracleParams op;
    op.epsilon = 0.0;
    return [op](const ArchitectureConfig& a) { return oracle_accuracy(op, *space_, a); };
  }

  static EvolutionConfig small() {
    EvolutionConfig c;
    c.init_population = 64;
    c.mutate_size = 16;
    c.crossover_size = 16;
    c.iterations = 5;
    return c;
  }

  static const SearchSpace* space_;
  static const SamplerTables* tables_;
};

const SearchSpace* Evo::space_ = nullptr;
const SamplerTables* Evo::tables_ = nullptr;

TEST_F(Evo, MutateContracts) {
  Rng rng(1);
  auto parent = rejection_sample(*space_, tables_->conditional, 14, 10000, rng).arch;
  EXPECT_EQ(mutate(parent, *space_, 0.0, 1e9, 10, rng).arch, parent);
  const auto one = testing_util::single_arch_space();
  const auto p1 = smallest_arch(one);
  EXPECT_EQ(mutate(p1, one, 1.0, 1e9, 10, rng).arch, p1);
  for (int i = 0; i < 300; ++i) {
    auto r = mutate(parent, *space_, 0.3, 400.0, 20, rng);
    EXPECT_TRUE(r.fell_back ? r.arch == parent : within(*space_, r.arch, 400.0));
    EXPECT_TRUE(is_valid(*space_, r.arch));
  }
  // At probability one every axis moves to a different choice.
  auto r = mutate(parent, *space_, 1.0, 1e9, 1, rng);
  for (std::size_t a = 0; a < space_->num_axes(); ++a)
    EXPECT_NE(r.arch.choice_indices[a], parent.choice_indices[a]);
}

TEST_F(Evo, MutateFallsBackWhenConstraintIsImpossible) {
  Rng rng(2);
  const auto parent = smallest_arch(*space_);
  auto r = mutate(parent, *space_, 0.5, 150.0, 7, rng);
  EXPECT_TRUE(r.fell_back);
  EXPECT_EQ(r.attempts, 7);
  EXPECT_EQ(r.arch, parent);
}

TEST_F(Evo, MutationIsUniformOverOtherChoices) {
  Rng rng(3);
  const std::size_t axis = space_->find_axis("mb5.depth").value();
  auto parent = smallest_arch(*space_);
  parent.choice_indices[axis] = 2;
  std::vector<int> hits(space_->axes()[axis].size(), 0);
  const int n = 30000;
  for (int i = 0; i < n; ++i) ++hits[mutate(parent, *space_, 1.0, 1e9, 1, rng).arch.choice_indices[axis]];
  EXPECT_EQ(hits[2], 0);
  const double expect = n / static_cast<double>(hits.size() - 1);
  for (std::size_t c = 0; c < hits.size(); ++c)
    if (c != 2) {
      EXPECT_NEAR(hits[c], expect, 0.05 * expect);
    }
}

TEST_F(Evo, CrossoverContracts) {
  Rng rng(4);
  auto a = rejection_sample(*space_, tables_->conditional, 12, 10000, rng).arch;
  auto b = rejection_sample(*space_, tables_->conditional, 16, 10000, rng).arch;
  EXPECT_EQ(crossover(a, a, *space_, 1e9, 5, rng).arch, a);
  for (int i = 0; i < 200; ++i) {
    auto r = crossover(a, b, *space_, 1e9, 5, rng);
    for (std::size_t x = 0; x < space_->num_axes(); ++x) {
      const int c = r.arch.choice_indices[x];
      EXPECT_TRUE(c == a.choice_indices[x] || c == b.choice_indices[x]);
    }
  }
  auto r = crossover(a, b, *space_, 100.0, 4, rng);
  EXPECT_TRUE(r.fell_back);
  EXPECT_EQ(r.arch, a);
  ArchitectureConfig shorter{std::vector<int>(3, 0)};
  EXPECT_THROW(crossover(a, shorter, *space_, 1e9, 1, rng), Error);
}

TEST_F(Evo, CrossoverInheritsHalfFromEachParent) {
  Rng rng(5);
  const auto a = smallest_arch(*space_);
  const auto b = largest_arch(*space_);
  std::vector<int> from_b(space_->num_axes(), 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto r = crossover(a, b, *space_, 1e9, 1, rng);
    for (std::size_t x = 0; x < from_b.size(); ++x) from_b[x] += r.arch.choice_indices[x] == b.choice_indices[x];
  }
  for (int k : from_b) EXPECT_NEAR(k / static_cast<double>(n), 0.5, 0.02);
}

TEST_F(Evo, ConfigChecks) {
  EvolutionConfig c;
  EXPECT_NO_THROW(c.check());
  EXPECT_EQ(c.expected_evaluations(), 5632);
  c.mutation_prob = 0.0;
  EXPECT_THROW(c.check(), Error);
  c = {};
  c.parent_fraction = 1.5;
  EXPECT_THROW(c.check(), Error);
  c = {};
  c.crossover_size = 0;
  EXPECT_THROW(c.check(), Error);
}

TEST_F(Evo, DefaultSizesEvaluate5632) {
  Rng rng(6);
  auto out = evolutionary_search(noiseless(), *space_, *tables_, EvolutionConfig{}, 450.0, rng);
  EXPECT_EQ(out.evaluated_count, 512 + 20 * (128 + 128));
  EXPECT_LE(out.unique_evaluations, out.evaluated_count);
  EXPECT_EQ(out.history.size(), 21u);
  EXPECT_LT(out.best.flops, 450.0);
}

TEST_F(Evo, ZeroIterationsReturnsBestSeed) {
  auto cfg = small();
  cfg.iterations = 0;
  Rng rng(7), replay(7);
  auto score = noiseless();
  auto out = evolutionary_search(score, *space_, *tables_, cfg, 400.0, rng);
  auto seeds = seed_population(*space_, *tables_, 400.0, cfg.init_population, replay);
  double best = -1;
  for (const auto& a : seeds) best = std::max(best, score(a));
  EXPECT_EQ(out.best.score, best);
  EXPECT_EQ(out.evaluated_count, cfg.init_population);
}

TEST_F(Evo, EveryEvaluationSatisfiesTheConstraint) {
  long calls = 0;
  bool ok = true;
  auto base = noiseless();
  ScoreFn watch = [&](const ArchitectureConfig& a) {
    ++calls;
    ok = ok && arch_flops(*space_, a).value < 300.0;
    return base(a);
  };
  Rng rng(8);
  auto out = evolutionary_search(watch, *space_, *tables_, small(), 300.0, rng);
  EXPECT_TRUE(ok);
  EXPECT_EQ(calls, out.unique_evaluations);
  for (std::size_t i = 1; i < out.history.size(); ++i) EXPECT_GE(out.history[i], out.history[i - 1]);
}

TEST_F(Evo, Deterministic) {
  const std::vector<double> cs{250, 450};
  auto a = evolutionary_search(noiseless(), *space_, *tables_, small(), cs, 99);
  auto b = evolutionary_search(noiseless(), *space_, *tables_, small(), cs, 99);
  ASSERT_EQ(a.runs.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.runs[i].best.arch, b.runs[i].best.arch);
    EXPECT_EQ(a.runs[i].history, b.runs[i].history);
  }
  EXPECT_EQ(a.evaluated_count, b.evaluated_count);
}

TEST_F(Evo, UnpopulatedConstraintIsAnError) {
  Rng rng(9);
  EXPECT_THROW(evolutionary_search(noiseless(), *space_, *tables_, small(), 150.0, rng), Error);
}

TEST_F(Evo, CloseToSampledOptimum) {
  auto score = noiseless();
  Rng rng(10), brute(11);
  auto out = evolutionary_search(score, *space_, *tables_, EvolutionConfig{}, 350.0, rng);
  double best = 0;
  for (const auto& a : seed_population(*space_, *tables_, 350.0, 20000, brute)) best = std::max(best, score(a));
  EXPECT_GE(out.best.score, best - 0.002);
}

TEST_F(Evo, LargerBudgetsNeverHurt) {
  const std::vector<double> cs{250, 350, 450, 600};
  auto res = evolutionary_search(noiseless(), *space_, *tables_, EvolutionConfig{}, cs, 12);
  double prev = -1;
  for (double c : cs) {
    const auto& b = res.best_per_constraint.at(c);
    EXPECT_LT(b.flops, c);
    EXPECT_GE(b.score, prev);
    prev = b.score;
  }
  EXPECT_EQ(res.evaluated_count, 4 * 5632);
}

}  // namespace
}  // namespace attsample
