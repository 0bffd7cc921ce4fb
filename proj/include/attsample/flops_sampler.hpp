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
 * \file flops_sampler.hpp
 * \brief FLOPs-constrained architecture sampling.
 *
 * An offline pool of m uniform architectures yields an empirical FLOPs prior
 * over bins of width `step`, and per-bin, per-axis categorical tables. A
 * constrained draw proposes every axis independently from its bin's table
 * and accepts once the proposal's FLOPs fall back into that bin.
 */
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "attsample/flops_model.hpp"
#include "attsample/random.hpp"
#include "attsample/search_space.hpp"

namespace attsample {

/// Half-open bins [j*step, (j+1)*step).
struct FlopsBinning {
  double step = 25.0;

  explicit FlopsBinning(double s = 25.0) : step(s) {
    if (!(step > 0.0) || !std::isfinite(step)) throw Error("FlopsBinning: step must be positive");
  }

  int bin(double mflops) const { return static_cast<int>(std::floor(mflops / step)); }
  int bin(Mflops f) const { return bin(f.value); }
  double lo(int b) const { return b * step; }
  double hi(int b) const { return (b + 1) * step; }
};

/// Thrown when a sampler exhausts its trial budget.
class SamplingError : public Error {
 public:
  SamplingError(const std::string& what, long trials) : Error(what), trials_(trials) {}
  long trials() const noexcept { return trials_; }

 private:
  long trials_;
};

class EmpiricalPrior {
 public:
  EmpiricalPrior() = default;
  EmpiricalPrior(FlopsBinning binning, const std::map<int, std::uint64_t>& counts) : binning_(binning) {
    for (auto [b, c] : counts) {
      if (c == 0) continue;
      bins_.push_back(b);
      counts_.push_back(c);
      total_ += c;
      cumulative_.push_back(total_);
    }
  }

  const FlopsBinning& binning() const noexcept { return binning_; }
  std::uint64_t total() const noexcept { return total_; }
  const std::vector<int>& bins() const noexcept { return bins_; }
  const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

  std::uint64_t count(int bin) const {
    auto it = std::lower_bound(bins_.begin(), bins_.end(), bin);
    return (it != bins_.end() && *it == bin) ? counts_[it - bins_.begin()] : 0;
  }
  double probability(int bin) const { return total_ ? static_cast<double>(count(bin)) / total_ : 0.0; }

  int mode() const {
    if (bins_.empty()) throw Error("empty prior has no mode");
    return bins_[std::max_element(counts_.begin(), counts_.end()) - counts_.begin()];
  }

  /// Sub-prior over the bins accepted by `keep`.
  EmpiricalPrior restricted(const std::function<bool(int)>& keep) const {
    std::map<int, std::uint64_t> c;
    for (std::size_t i = 0; i < bins_.size(); ++i)
      if (keep(bins_[i])) c[bins_[i]] = counts_[i];
    return EmpiricalPrior(binning_, c);
  }

  /// Bin drawn with probability count/total.
  int sample(Rng& rng) const {
    if (total_ == 0) throw Error("sample_target_flops: empty prior");
    const std::uint64_t u = std::uniform_int_distribution<std::uint64_t>(0, total_ - 1)(rng);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return bins_[it - cumulative_.begin()];
  }

 private:
  FlopsBinning binning_;
  std::vector<int> bins_;
  std::vector<std::uint64_t> counts_;
  std::vector<std::uint64_t> cumulative_;
  std::uint64_t total_ = 0;
};

inline int sample_target_flops(const EmpiricalPrior& prior, Rng& rng) { return prior.sample(rng); }

/// Per-axis categorical distributions for one FLOPs bin.
struct BinConditional {
  std::uint64_t count = 0;
  std::vector<std::vector<double>> probs;  // [axis][choice]
  std::vector<std::vector<double>> cdf;

  void finalize_cdf() {
    cdf.clear();
    for (const auto& p : probs) {
      std::vector<double> c(p.size());
      double acc = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) c[i] = (acc += p[i]);
      cdf.push_back(std::move(c));
    }
  }

  int draw(std::size_t axis, Rng& rng) const {
    const auto& c = cdf[axis];
    const double u = uniform01(rng) * c.back();
    auto it = std::upper_bound(c.begin(), c.end(), u);
    if (it == c.end()) --it;
    // Skip zero-probability choices that share a cumulative value.
    while (it != c.begin() && probs[axis][it - c.begin()] == 0.0) --it;
    return static_cast<int>(it - c.begin());
  }
};

class ConditionalTable {
 public:
  ConditionalTable() = default;
  ConditionalTable(FlopsBinning binning, std::vector<std::string> axis_names, std::map<int, BinConditional> bins)
      : binning_(binning), axis_names_(std::move(axis_names)), bins_(std::move(bins)) {
    for (auto& [b, e] : bins_) e.finalize_cdf();
  }

  const FlopsBinning& binning() const noexcept { return binning_; }
  const std::vector<std::string>& axis_names() const noexcept { return axis_names_; }
  const std::map<int, BinConditional>& bins() const noexcept { return bins_; }
  bool populated(int bin) const { return bins_.count(bin) > 0; }

  const BinConditional& at(int bin) const {
    auto it = bins_.find(bin);
    if (it == bins_.end()) throw Error("conditional table: bin " + std::to_string(bin) + " is not populated");
    return it->second;
  }

 private:
  FlopsBinning binning_;
  std::vector<std::string> axis_names_;
  std::map<int, BinConditional> bins_;
};

struct SamplerTables {
  EmpiricalPrior prior;
  ConditionalTable conditional;
};

/// Integer counts behind the tables. Merging is addition, so any partition
/// or order of the same samples yields identical tables.
class TableAccumulator {
 public:
  TableAccumulator(const SearchSpace& space, FlopsBinning binning) : space_(&space), binning_(binning) {}

  void add(const ArchitectureConfig& arch) { add(arch, arch_flops(*space_, arch)); }

  void add(const ArchitectureConfig& arch, Mflops flops) {
    auto& e = entry(binning_.bin(flops));
    ++e.count;
    for (std::size_t a = 0; a < arch.choice_indices.size(); ++a) ++e.choices[a][arch.choice_indices[a]];
  }

  void merge(const TableAccumulator& other) {
    for (const auto& [b, oe] : other.bins_) {
      auto& e = entry(b);
      e.count += oe.count;
      for (std::size_t a = 0; a < e.choices.size(); ++a)
        for (std::size_t k = 0; k < e.choices[a].size(); ++k) e.choices[a][k] += oe.choices[a][k];
    }
  }

  SamplerTables finish() const {
    std::map<int, std::uint64_t> counts;
    std::map<int, BinConditional> cond;
    for (const auto& [b, e] : bins_) {
      counts[b] = e.count;
      BinConditional bc;
      bc.count = e.count;
      for (const auto& ax : e.choices) {
        std::vector<double> p(ax.size());
        for (std::size_t k = 0; k < ax.size(); ++k) p[k] = static_cast<double>(ax[k]) / static_cast<double>(e.count);
        bc.probs.push_back(std::move(p));
      }
      cond.emplace(b, std::move(bc));
    }
    std::vector<std::string> names;
    for (const auto& axis : space_->axes()) names.push_back(axis.name);
    return {EmpiricalPrior(binning_, counts), ConditionalTable(binning_, std::move(names), std::move(cond))};
  }

 private:
  struct Entry {
    std::uint64_t count = 0;
    std::vector<std::vector<std::uint64_t>> choices;
  };

  Entry& entry(int bin) {
    auto [it, fresh] = bins_.try_emplace(bin);
    if (fresh)
      for (const auto& axis : space_->axes()) it->second.choices.emplace_back(axis.size(), 0);
    return it->second;
  }

  const SearchSpace* space_;
  FlopsBinning binning_;
  std::map<int, Entry> bins_;
};

/// Draws m uniform architectures in `chunks` independently seeded chunks
/// (run on worker threads) and builds prior + conditional tables. The
/// result depends only on (seed, m, chunks).
inline SamplerTables build_tables(const SearchSpace& space, std::uint64_t m, FlopsBinning binning,
                                  std::uint64_t seed, unsigned chunks = 8) {
  if (m < 1) throw Error("build_tables: m must be >= 1");
  chunks = std::max(1u, chunks);
  std::vector<TableAccumulator> parts(chunks, TableAccumulator(space, binning));
  auto work = [&](unsigned c) {
    Rng rng = substream(seed, "sampler.chunk", c);
    const std::uint64_t begin = m * c / chunks;
    const std::uint64_t end = m * (c + 1) / chunks;
    for (std::uint64_t i = begin; i < end; ++i) parts[c].add(uniform_sample(space, rng));
  };
  const unsigned workers = std::max(1u, std::min(chunks, std::thread::hardware_concurrency()));
  if (workers == 1) {
    for (unsigned c = 0; c < chunks; ++c) work(c);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (unsigned c = w; c < chunks; c += workers) work(c);
      });
  }
  TableAccumulator all(space, binning);
  for (const auto& p : parts) all.merge(p);
  return all.finish();
}

inline SamplerTables build_tables(const SearchSpace& space, std::uint64_t m, FlopsBinning binning, Rng& rng,
                                  unsigned chunks = 8) {
  return build_tables(space, m, binning, static_cast<std::uint64_t>(rng()), chunks);
}

struct SampleResult {
  ArchitectureConfig arch;
  long trials = 0;
};

inline constexpr long kDefaultFactorizedTrials = 10'000;
inline constexpr long kDefaultNaiveTrials = 1'000'000;

/// Rejection sampling from the factorized per-bin proposal.
inline SampleResult rejection_sample(const SearchSpace& space, const ConditionalTable& conditional, int target_bin,
                                     long max_trials, Rng& rng) {
  const auto& entry = conditional.at(target_bin);
  if (entry.probs.size() != space.num_axes()) throw Error("conditional table does not match the search space");
  ArchitectureConfig arch{std::vector<int>(space.num_axes())};
  for (long t = 1; t <= max_trials; ++t) {
    for (std::size_t a = 0; a < space.num_axes(); ++a) arch.choice_indices[a] = entry.draw(a, rng);
    if (conditional.binning().bin(arch_flops(space, arch)) == target_bin) return {std::move(arch), t};
  }
  throw SamplingError("rejection_sample: no acceptance for bin " + std::to_string(target_bin) + " within " +
                          std::to_string(max_trials) + " trials",
                      max_trials);
}

/// Baseline: uniform proposals over the whole space.
inline SampleResult naive_rejection_sample(const SearchSpace& space, const FlopsBinning& binning, int target_bin,
                                           long max_trials, Rng& rng) {
  for (long t = 1; t <= max_trials; ++t) {
    auto arch = uniform_sample(space, rng);
    if (binning.bin(arch_flops(space, arch)) == target_bin) return {std::move(arch), t};
  }
  throw SamplingError("naive_rejection_sample: no acceptance for bin " + std::to_string(target_bin) + " within " +
                          std::to_string(max_trials) + " trials",
                      max_trials);
}

// ---- persistence -----------------------------------------------------------

inline nlohmann::json tables_to_json(const SamplerTables& t) {
  nlohmann::json bins = nlohmann::json::array();
  const auto& names = t.conditional.axis_names();
  for (const auto& [b, e] : t.conditional.bins()) {
    nlohmann::json axes = nlohmann::json::array();
    for (std::size_t a = 0; a < e.probs.size(); ++a) axes.push_back({{"name", names[a]}, {"probs", e.probs[a]}});
    bins.push_back({{"bin", b}, {"count", e.count}, {"axes", std::move(axes)}});
  }
  return {{"step", t.prior.binning().step}, {"total", t.prior.total()}, {"bins", std::move(bins)}};
}

/// Loads tables and checks that their axes match `space`.
inline SamplerTables tables_from_json(const SearchSpace& space, const nlohmann::json& j) {
  try {
    FlopsBinning binning(j.at("step").get<double>());
    std::map<int, std::uint64_t> counts;
    std::map<int, BinConditional> cond;
    std::vector<std::string> names;
    for (const auto& axis : space.axes()) names.push_back(axis.name);
    for (const auto& jb : j.at("bins")) {
      const int b = jb.at("bin").get<int>();
      BinConditional e;
      e.count = jb.at("count").get<std::uint64_t>();
      const auto& axes = jb.at("axes");
      if (axes.size() != names.size()) throw Error("tables: axis count mismatch");
      for (std::size_t a = 0; a < axes.size(); ++a) {
        if (axes[a].at("name").get<std::string>() != names[a]) throw Error("tables: axis name mismatch");
        auto p = axes[a].at("probs").get<std::vector<double>>();
        if (p.size() != space.axes()[a].size()) throw Error("tables: choice count mismatch");
        e.probs.push_back(std::move(p));
      }
      counts[b] = e.count;
      cond.emplace(b, std::move(e));
    }
    SamplerTables t{EmpiricalPrior(binning, counts), ConditionalTable(binning, std::move(names), std::move(cond))};
    if (t.prior.total() != j.at("total").get<std::uint64_t>()) throw Error("tables: total does not match bin counts");
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed tables JSON: ") + e.what());
  }
}

}  // namespace attsample
