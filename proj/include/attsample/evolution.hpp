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
 * \file evolution.hpp
 * \brief Resource-constrained evolutionary search over a trained scorer.
 *
 * The population is seeded through the FLOPs sampler, then each iteration
 * breeds mutations and crossovers of the top parents and keeps the best
 * `init_population` of parents and children together (elitist merge). All
 * candidates satisfy FLOPs < constraint.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "attsample/flops_model.hpp"
#include "attsample/flops_sampler.hpp"
#include "attsample/search_space.hpp"

namespace attsample {

struct EvolutionConfig {
  int init_population = 512;
  int mutate_size = 128;
  int crossover_size = 128;
  int iterations = 20;
  double mutation_prob = 0.1;
  double parent_fraction = 0.25;
  int max_retries = 100;

  void check() const {
    if (init_population < 1 || mutate_size < 1 || crossover_size < 1)
      throw Error("evolution: population sizes must be >= 1");
    if (iterations < 0) throw Error("evolution: iterations must be >= 0");
    if (!(mutation_prob > 0.0 && mutation_prob <= 1.0)) throw Error("evolution: need 0 < mutation_prob <= 1");
    if (!(parent_fraction > 0.0 && parent_fraction <= 1.0)) throw Error("evolution: need 0 < parent_fraction <= 1");
    if (max_retries < 1) throw Error("evolution: max_retries must be >= 1");
  }

  long expected_evaluations() const {
    return init_population + static_cast<long>(iterations) * (mutate_size + crossover_size);
  }
};

struct VariationResult {
  ArchitectureConfig arch;
  int attempts = 0;
  bool fell_back = false;
};

inline bool within(const SearchSpace& space, const ArchitectureConfig& a, double constraint) {
  return arch_flops(space, a).value < constraint;
}

/// Resamples each axis with probability `mutation_prob` uniformly over its
/// other choices, retrying until FLOPs < constraint. Falls back to the
/// parent after `max_retries` attempts.
inline VariationResult mutate(const ArchitectureConfig& parent, const SearchSpace& space, double mutation_prob,
                              double constraint, int max_retries, Rng& rng) {
  std::bernoulli_distribution flip(std::clamp(mutation_prob, 0.0, 1.0));
  for (int attempt = 1; attempt <= max_retries; ++attempt) {
    ArchitectureConfig child = parent;
    for (std::size_t a = 0; a < space.num_axes(); ++a) {
      const std::size_t n = space.axes()[a].size();
      if (n < 2 || !flip(rng)) continue;
      // Uniform over the n - 1 other choices.
      const auto r = static_cast<int>(uniform_index(rng, n - 1));
      child.choice_indices[a] = r >= parent.choice_indices[a] ? r + 1 : r;
    }
    if (within(space, child, constraint)) return {std::move(child), attempt, false};
  }
  return {parent, max_retries, true};
}

/// Uniform crossover. `better` is returned when no child satisfies the
/// constraint within `max_retries` attempts.
inline VariationResult crossover(const ArchitectureConfig& better, const ArchitectureConfig& other,
                                 const SearchSpace& space, double constraint, int max_retries, Rng& rng) {
  if (better.choice_indices.size() != other.choice_indices.size()) throw Error("crossover: parent length mismatch");
  std::bernoulli_distribution coin(0.5);
  for (int attempt = 1; attempt <= max_retries; ++attempt) {
    ArchitectureConfig child = better;
    for (std::size_t a = 0; a < child.choice_indices.size(); ++a)
      if (coin(rng)) child.choice_indices[a] = other.choice_indices[a];
    if (within(space, child, constraint)) return {std::move(child), attempt, false};
  }
  return {better, max_retries, true};
}

struct ScoredArch {
  ArchitectureConfig arch;
  double score = 0.0;
  double flops = 0.0;
};

struct SearchOutcome {
  double constraint = 0.0;
  ScoredArch best;
  long evaluated_count = 0;     // every candidate scored, duplicates included
  long unique_evaluations = 0;  // calls into the scorer
  long fallbacks = 0;           // variations that returned a parent
  std::vector<double> history;  // best score after seeding and after each iteration
};

struct EvolutionResult {
  std::map<double, ScoredArch> best_per_constraint;
  long evaluated_count = 0;
  std::vector<SearchOutcome> runs;
};

using ScoreFn = std::function<double(const ArchitectureConfig&)>;

namespace detail {

inline bool ranks_before(const ScoredArch& a, const ScoredArch& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.arch < b.arch;
}

}  // namespace detail

/// Draws `count` architectures with FLOPs < constraint through the prior
/// restricted to bins starting below the constraint.
inline std::vector<ArchitectureConfig> seed_population(const SearchSpace& space, const SamplerTables& tables,
                                                       double constraint, int count, Rng& rng,
                                                       long max_trials = kDefaultFactorizedTrials) {
  const auto& bn = tables.prior.binning();
  auto prior = tables.prior.restricted([&](int b) { return bn.lo(b) < constraint; });
  if (prior.total() == 0)
    throw Error("evolution: no populated FLOPs bin below constraint " + std::to_string(constraint));
  std::vector<ArchitectureConfig> out;
  const long max_attempts = 20L * count + 1000;
  for (long attempt = 0; static_cast<int>(out.size()) < count; ++attempt) {
    if (attempt >= max_attempts)
      throw Error("evolution: sampler cannot populate constraint " + std::to_string(constraint));
    try {
      auto r = rejection_sample(space, tables.conditional, prior.sample(rng), max_trials, rng);
      if (within(space, r.arch, constraint)) out.push_back(std::move(r.arch));
    } catch (const SamplingError&) {
    }
  }
  return out;
}

inline SearchOutcome evolutionary_search(const ScoreFn& eval_fn, const SearchSpace& space,
                                         const SamplerTables& tables, const EvolutionConfig& cfg, double constraint,
                                         Rng& rng) {
  cfg.check();
  SearchOutcome out;
  out.constraint = constraint;
  std::unordered_map<ArchitectureConfig, double, ArchitectureHash> memo;
  auto score = [&](const ArchitectureConfig& a) {
    ++out.evaluated_count;
    auto it = memo.find(a);
    if (it != memo.end()) return it->second;
    ++out.unique_evaluations;
    const double s = eval_fn(a);
    memo.emplace(a, s);
    return s;
  };
  auto scored = [&](ArchitectureConfig a) {
    const double f = arch_flops(space, a).value;
    if (!(f < constraint)) throw Error("evolution: candidate violates the FLOPs constraint");
    const double s = score(a);
    return ScoredArch{std::move(a), s, f};
  };

  std::vector<ScoredArch> pop;
  for (auto& a : seed_population(space, tables, constraint, cfg.init_population, rng)) pop.push_back(scored(std::move(a)));
  std::sort(pop.begin(), pop.end(), detail::ranks_before);
  out.history.push_back(pop.front().score);

  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t n_parents =
        std::max<std::size_t>(1, static_cast<std::size_t>(cfg.parent_fraction * static_cast<double>(pop.size())));
    std::vector<ScoredArch> children;
    children.reserve(cfg.mutate_size + cfg.crossover_size);
    for (int m = 0; m < cfg.mutate_size; ++m) {
      const auto& p = pop[uniform_index(rng, n_parents)];
      auto r = mutate(p.arch, space, cfg.mutation_prob, constraint, cfg.max_retries, rng);
      out.fallbacks += r.fell_back;
      children.push_back(scored(std::move(r.arch)));
    }
    for (int c = 0; c < cfg.crossover_size; ++c) {
      std::size_t i = uniform_index(rng, n_parents);
      std::size_t j = uniform_index(rng, n_parents);
      if (i > j) std::swap(i, j);  // pop is ranked, so pop[i] is the better parent
      auto r = crossover(pop[i].arch, pop[j].arch, space, constraint, cfg.max_retries, rng);
      out.fallbacks += r.fell_back;
      children.push_back(scored(std::move(r.arch)));
    }
    pop.insert(pop.end(), std::make_move_iterator(children.begin()), std::make_move_iterator(children.end()));
    std::sort(pop.begin(), pop.end(), detail::ranks_before);
    if (pop.size() > static_cast<std::size_t>(cfg.init_population)) pop.resize(cfg.init_population);
    out.history.push_back(pop.front().score);
  }
  out.best = pop.front();
  return out;
}

/// Runs one search per constraint, each from its own substream of `seed`.
inline EvolutionResult evolutionary_search(const ScoreFn& eval_fn, const SearchSpace& space,
                                           const SamplerTables& tables, const EvolutionConfig& cfg,
                                           std::span<const double> constraints, std::uint64_t seed) {
  EvolutionResult res;
  for (double c : constraints) {
    Rng rng = substream(seed, "evolution.constraint", static_cast<std::uint64_t>(c * 1000.0));
    auto run = evolutionary_search(eval_fn, space, tables, cfg, c, rng);
    res.evaluated_count += run.evaluated_count;
    res.best_per_constraint[c] = run.best;
    res.runs.push_back(std::move(run));
  }
  return res;
}

}  // namespace attsample
