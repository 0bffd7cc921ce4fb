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
 * \file supernet_sim.hpp
 * \brief Simulated weight-sharing supernet and the attentive training loop.
 *
 * Shared weights are modelled as one skill value in [0, 1] per (axis,
 * choice). Training a sub-network moves the skill of every option it uses
 * towards 1 by s += eta * (1 - s); a sub-network evaluates to its oracle
 * accuracy scaled by the mean skill of its options. Options shared by many
 * architectures therefore train together, and rarely sampled options lag.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "attsample/estimators.hpp"
#include "attsample/flops_model.hpp"
#include "attsample/flops_sampler.hpp"
#include "attsample/pareto.hpp"
#include "attsample/random_forest.hpp"
#include "attsample/search_space.hpp"

namespace attsample {

struct SupernetState {
  std::vector<std::vector<double>> skills;  // [axis][choice]
  long step_count = 0;
  double eta = 0.01;

  static SupernetState initial(const SearchSpace& space, double s0 = 0.30, double eta = 0.01) {
    if (!(s0 >= 0.0 && s0 <= 1.0)) throw Error("supernet: initial skill must lie in [0, 1]");
    if (!(eta >= 0.0 && eta <= 1.0)) throw Error("supernet: eta must lie in [0, 1]");
    SupernetState s;
    for (const auto& axis : space.axes()) s.skills.emplace_back(axis.size(), s0);
    s.eta = eta;
    return s;
  }

  double mean_skill(const ArchitectureConfig& arch) const {
    if (skills.empty()) return 1.0;
    double sum = 0.0;
    for (std::size_t a = 0; a < skills.size(); ++a) sum += skills[a][arch.choice_indices[a]];
    return sum / static_cast<double>(skills.size());
  }

  /// The skill update applied when `arch` is trained for one step.
  void train(const ArchitectureConfig& arch) {
    for (std::size_t a = 0; a < skills.size(); ++a) {
      double& s = skills[a][arch.choice_indices[a]];
      s += eta * (1.0 - s);
    }
  }
};

inline double eval_subnet(const SupernetState& state, const OracleParams& params, const SearchSpace& space,
                          const ArchitectureConfig& arch) {
  return oracle_accuracy(params, space, arch) * state.mean_skill(arch);
}

enum class Strategy { Uniform, BestUp, WorstUp };
enum class EstimatorKind { OracleLoss, PredictedAcc };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::Uniform: return "Uniform";
    case Strategy::BestUp: return "BestUp";
    case Strategy::WorstUp: return "WorstUp";
  }
  return "?";
}

inline const char* to_string(EstimatorKind e) { return e == EstimatorKind::OracleLoss ? "loss" : "acc"; }

/// An attentive pool built offline: architectures plus their FLOPs bins.
struct OfflinePool {
  std::vector<ArchitectureConfig> archs;
  std::map<int, std::vector<std::size_t>> by_bin;
};

struct StrategyConfig {
  Strategy mode = Strategy::Uniform;
  int k = 1;
  int n = 2;
  EstimatorKind estimator = EstimatorKind::OracleLoss;
  double noise_sigma = 0.01;
  std::shared_ptr<const OfflinePool> offline_pool;
  std::string pool_label;  // e.g. "1M"; names the strategy when a pool is set

  static StrategyConfig uniform(int n = 2) {
    StrategyConfig c;
    c.n = n;
    return c;
  }

  static StrategyConfig attentive(Strategy mode, EstimatorKind est, std::optional<int> k = std::nullopt, int n = 2) {
    StrategyConfig c;
    c.mode = mode;
    c.estimator = est;
    c.k = k.value_or(est == EstimatorKind::PredictedAcc ? 50 : 3);
    c.n = n;
    return c;
  }

  void check() const {
    if (k < 1) throw Error("strategy: k must be >= 1");
    if (n < 1) throw Error("strategy: n must be >= 1");
    if (mode == Strategy::Uniform && k != 1) throw Error("strategy: Uniform requires k = 1");
    if (noise_sigma < 0.0) throw Error("strategy: negative noise_sigma");
  }

  std::string name() const {
    if (mode == Strategy::Uniform) return "Uniform";
    const std::string size = offline_pool ? (pool_label.empty() ? "pool" : pool_label) : std::to_string(k);
    return std::string(to_string(mode)) + "-" + size + " (" + to_string(estimator) + ")";
  }
};

/// Everything a training step reads but never writes.
struct TrainingContext {
  const SearchSpace* space = nullptr;
  const SamplerTables* tables = nullptr;
  OracleParams oracle;
  const AccuracyPredictor* predictor = nullptr;
  long max_trials = kDefaultFactorizedTrials;
  int max_target_resamples = 10;
};

struct DrawLog {
  int target_bin = 0;
  std::vector<std::uint64_t> candidate_ids;
  std::vector<double> scores;  // empty when k = 1 (nothing to rank)
  std::size_t selected = 0;
};

struct StepLog {
  long step = 0;
  std::vector<DrawLog> draws;
  int updates = 0;
  long eval_cost = 0;  // estimator evaluations beyond the trained sub-networks
};

inline std::uint64_t arch_id(const ArchitectureConfig& arch) { return hash_combine(0x0a7c, arch.choice_indices); }

namespace detail {

inline std::vector<ArchitectureConfig> draw_candidates(const TrainingContext& ctx, const StrategyConfig& strat,
                                                       int& target_bin, Rng& rng) {
  const auto& space = *ctx.space;
  std::string last_error;
  for (int attempt = 0; attempt < ctx.max_target_resamples; ++attempt) {
    std::vector<ArchitectureConfig> out;
    if (strat.offline_pool) {
      const auto& pool = *strat.offline_pool;
      auto prior = ctx.tables->prior.restricted([&](int b) { return pool.by_bin.count(b) > 0; });
      if (prior.total() == 0) throw Error("offline pool covers no populated FLOPs bin");
      target_bin = prior.sample(rng);
      const auto& members = pool.by_bin.at(target_bin);
      for (int i = 0; i < strat.k; ++i) out.push_back(pool.archs[members[uniform_index(rng, members.size())]]);
      return out;
    }
    target_bin = sample_target_flops(ctx.tables->prior, rng);
    try {
      for (int i = 0; i < strat.k; ++i)
        out.push_back(rejection_sample(space, ctx.tables->conditional, target_bin, ctx.max_trials, rng).arch);
      return out;
    } catch (const SamplingError& e) {
      last_error = e.what();
    }
  }
  throw Error("train_step: sampler failed after " + std::to_string(ctx.max_target_resamples) +
              " target resamples: " + last_error);
}

}  // namespace detail

/// One iteration of the attentive loop: sandwich updates of the smallest and
/// largest sub-networks, then n (target FLOPs, k candidates, select, train)
/// rounds.
inline StepLog train_step(SupernetState& state, const TrainingContext& ctx, const StrategyConfig& strat, Rng& rng) {
  strat.check();
  const auto& space = *ctx.space;
  StepLog log;
  log.step = ++state.step_count;

  state.train(smallest_arch(space));
  state.train(largest_arch(space));
  log.updates = 2;

  for (int i = 0; i < strat.n; ++i) {
    DrawLog draw;
    auto cands = detail::draw_candidates(ctx, strat, draw.target_bin, rng);
    for (const auto& c : cands) draw.candidate_ids.push_back(arch_id(c));
    if (cands.size() > 1) {
      std::vector<Candidate> scored;
      scored.reserve(cands.size());
      for (const auto& c : cands) {
        Candidate sc;
        sc.encoding = encode(space, c);
        sc.flops = arch_flops(space, c).value;
        if (strat.estimator == EstimatorKind::OracleLoss) {
          const double acc = oracle_accuracy(ctx.oracle, sc.flops, sc.encoding) * state.mean_skill(c);
          sc.score = minibatch_loss_proxy(acc, strat.noise_sigma, rng);
        } else {
          if (!ctx.predictor) throw Error("train_step: PredictedAcc strategy without a predictor");
          sc.score = ctx.predictor->predict(std::span<const int>(sc.encoding));
        }
        draw.scores.push_back(sc.score);
        scored.push_back(std::move(sc));
      }
      log.eval_cost += static_cast<long>(scored.size());
      const SelectMode mode = strat.mode == Strategy::WorstUp ? SelectMode::Worst : SelectMode::Best;
      draw.selected = select_attentive(scored, mode);
    }
    state.train(cands[draw.selected]);
    ++log.updates;
    log.draws.push_back(std::move(draw));
  }
  return log;
}

// ---- probe set and trajectories -------------------------------------------

/// Fixed evaluation set, drawn once from the sampler: `per_bucket`
/// architectures per FLOPs bucket of width `bucket_width`.
struct ProbeSet {
  std::vector<ArchitectureConfig> archs;
  std::vector<double> flops;
  std::vector<double> oracle;
  std::vector<double> edges;
};

inline ProbeSet make_probe_set(const SearchSpace& space, const SamplerTables& tables, const OracleParams& oracle,
                               Rng& rng, std::size_t per_bucket = 64, double bucket_width = 50.0,
                               long max_trials = kDefaultFactorizedTrials) {
  const auto& prior = tables.prior;
  if (prior.total() == 0) throw Error("probe set: empty prior");
  const auto& bn = prior.binning();
  const double lo = std::floor(bn.lo(prior.bins().front()) / bucket_width) * bucket_width;
  const double hi = std::ceil(bn.hi(prior.bins().back()) / bucket_width) * bucket_width;
  ProbeSet probe;
  probe.edges = uniform_edges(lo, hi, bucket_width);
  for (std::size_t b = 0; b + 1 < probe.edges.size(); ++b) {
    const double blo = probe.edges[b], bhi = probe.edges[b + 1];
    auto sub = prior.restricted([&](int bin) { return bn.lo(bin) >= blo && bn.lo(bin) < bhi; });
    if (sub.total() == 0) continue;
    std::size_t got = 0;
    for (std::size_t attempt = 0; got < per_bucket && attempt < 4 * per_bucket; ++attempt) {
      try {
        auto r = rejection_sample(space, tables.conditional, sub.sample(rng), max_trials, rng);
        probe.flops.push_back(arch_flops(space, r.arch).value);
        probe.oracle.push_back(oracle_accuracy(oracle, space, r.arch));
        probe.archs.push_back(std::move(r.arch));
        ++got;
      } catch (const SamplingError&) {
      }
    }
  }
  return probe;
}

struct Snapshot {
  long step = 0;
  std::vector<BucketStats> buckets;
  FrontReport fronts;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
};

inline std::vector<EvaluatedPoint> evaluate_probe(const SupernetState& state, const ProbeSet& probe) {
  std::vector<EvaluatedPoint> pts(probe.archs.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    pts[i] = {static_cast<std::uint64_t>(i), probe.flops[i], probe.oracle[i] * state.mean_skill(probe.archs[i])};
  return pts;
}

inline Snapshot take_snapshot(const SupernetState& state, const ProbeSet& probe) {
  auto pts = evaluate_probe(state, probe);
  Snapshot s;
  s.step = state.step_count;
  s.buckets = bucket_stats(pts, probe.edges);
  if (!pts.empty()) s.fronts = front_report(pts);
  return s;
}

struct TrainingRun {
  SupernetState state;
  Trajectory trajectory;
  std::vector<StepLog> logs;
  long total_updates = 0;
  long total_eval_cost = 0;
};

/// Runs `steps` training steps from `initial`, snapshotting the probe set at
/// step 0, every `snapshot_every` steps, and at the final step.
inline TrainingRun run_training(const TrainingContext& ctx, const StrategyConfig& strat, long steps,
                                long snapshot_every, const ProbeSet& probe, Rng& rng,
                                std::optional<SupernetState> initial = std::nullopt, bool keep_logs = false) {
  if (steps < 1) throw Error("run_training: steps must be >= 1");
  if (snapshot_every < 1) throw Error("run_training: snapshot_every must be >= 1");
  TrainingRun run{initial ? *initial : SupernetState::initial(*ctx.space), {}, {}, 0, 0};
  run.trajectory.snapshots.push_back(take_snapshot(run.state, probe));
  for (long s = 1; s <= steps; ++s) {
    auto log = train_step(run.state, ctx, strat, rng);
    run.total_updates += log.updates;
    run.total_eval_cost += log.eval_cost;
    if (keep_logs) run.logs.push_back(std::move(log));
    if (s % snapshot_every == 0 || s == steps) run.trajectory.snapshots.push_back(take_snapshot(run.state, probe));
  }
  return run;
}

/// One row per (snapshot, bucket); empty buckets leave the statistics blank.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& t) {
  os << "step,bucket_lo,bucket_hi,min,q1,median,q3,max,count\n";
  for (const auto& snap : t.snapshots)
    for (const auto& b : snap.buckets) {
      os << snap.step << ',' << b.lo << ',' << b.hi << ',';
      if (b.count)
        os << b.min << ',' << b.q1 << ',' << b.median << ',' << b.q3 << ',' << b.max;
      else
        os << ",,,,";
      os << ',' << b.count << '\n';
    }
}

/// Scores `pool_size` uniform architectures with the predictor and keeps the
/// best (BestUp) or worst (WorstUp) Pareto front as the attentive pool.
inline OfflinePool build_offline_pool(const SearchSpace& space, const AccuracyPredictor& predictor,
                                      std::size_t pool_size, Strategy mode, const FlopsBinning& binning, Rng& rng) {
  if (mode == Strategy::Uniform) throw Error("offline pool needs BestUp or WorstUp");
  if (pool_size < 1) throw Error("offline pool: pool_size must be >= 1");
  std::vector<ArchitectureConfig> drawn;
  std::vector<EvaluatedPoint> pts;
  drawn.reserve(pool_size);
  pts.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) {
    auto a = uniform_sample(space, rng);
    const auto enc = encode(space, a);
    pts.push_back({i, arch_flops(space, a).value, predictor.predict(std::span<const int>(enc))});
    drawn.push_back(std::move(a));
  }
  const auto keep = mode == Strategy::BestUp ? best_pareto_indices(pts) : worst_pareto_indices(pts);
  OfflinePool pool;
  for (auto i : keep) {
    pool.by_bin[binning.bin(pts[i].flops)].push_back(pool.archs.size());
    pool.archs.push_back(drawn[i]);
  }
  return pool;
}

}  // namespace attsample
