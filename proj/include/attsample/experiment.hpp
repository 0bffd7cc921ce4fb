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
 * \file experiment.hpp
 * \brief End-to-end experiment: configuration, staged pipeline, artifacts.
 *
 * Stages run in order: sampler tables, a short uniform "early" training,
 * predictor fit on early-state accuracies, full training per strategy, and
 * evolutionary search per FLOPs constraint. Every stage draws from its own
 * named substream of the root seed. Every artifact carries the run id, the
 * FNV-1a hash of the canonical configuration.
 */
#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "attsample/estimators.hpp"
#include "attsample/evolution.hpp"
#include "attsample/flops_sampler.hpp"
#include "attsample/pareto.hpp"
#include "attsample/random_forest.hpp"
#include "attsample/search_space.hpp"
#include "attsample/supernet_sim.hpp"

namespace attsample {

/// An error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string detail)
      : Error(stage + ": " + detail), stage_(std::move(stage)), detail_(std::move(detail)) {}
  const std::string& stage() const noexcept { return stage_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string stage_;
  std::string detail_;
};

// ---- configuration ---------------------------------------------------------

struct PredictorSettings {
  int pairs = 1024;
  int train = 512;
  std::string featurization = "value";  // or "one_hot"
  ForestConfig forest;
};

struct TrainingSettings {
  long steps = 5000;
  long snapshot_every = 500;
  int probe_per_bucket = 64;
  double bucket_width = 50.0;
  double noise_sigma = 0.01;
};

struct SearchSettings {
  EvolutionConfig evolution;
  std::vector<double> constraints{250, 350, 450, 600};
  std::string scorer = "supernet";  // or "predictor"
  std::string strategy = "BestUp-3 (loss)";  // supernet searched when scorer = supernet
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  bool couple_stem_mb1 = false;
  std::uint64_t sampler_m = 1'000'000;
  double bin_step = 25.0;
  unsigned sampler_chunks = 8;
  OracleParams oracle;
  double s0 = 0.30;
  double eta = 0.01;
  long early_steps = 300;
  PredictorSettings predictor;
  TrainingSettings training;
  std::vector<std::string> strategies{"Uniform", "BestUp-3 (loss)", "WorstUp-3 (loss)", "BestUp-50 (acc)",
                                      "WorstUp-50 (acc)"};
  std::size_t offline_pool_size = 1'000'000;
  SearchSettings search;
  std::string out = "results";
  bool svg = true;
};

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  const auto& f = c.predictor.forest;
  const auto& e = c.search.evolution;
  return {
      {"seed", c.seed},
      {"space", {{"couple_stem_mb1", c.couple_stem_mb1}}},
      {"sampler", {{"m", c.sampler_m}, {"step", c.bin_step}, {"chunks", c.sampler_chunks}}},
      {"oracle",
       {{"a", c.oracle.a}, {"b", c.oracle.b}, {"lambda", c.oracle.lambda}, {"epsilon", c.oracle.epsilon},
        {"seed", c.oracle.seed}}},
      {"supernet", {{"s0", c.s0}, {"eta", c.eta}, {"early_steps", c.early_steps}}},
      {"predictor",
       {{"pairs", c.predictor.pairs},
        {"train", c.predictor.train},
        {"featurization", c.predictor.featurization},
        {"n_trees", f.n_trees},
        {"max_depth", f.max_depth},
        {"min_samples_leaf", f.min_samples_leaf},
        {"bootstrap", f.bootstrap}}},
      {"training",
       {{"steps", c.training.steps},
        {"snapshot_every", c.training.snapshot_every},
        {"probe_per_bucket", c.training.probe_per_bucket},
        {"bucket_width", c.training.bucket_width},
        {"noise_sigma", c.training.noise_sigma}}},
      {"strategies", c.strategies},
      {"offline_pool_size", c.offline_pool_size},
      {"search",
       {{"constraints", c.search.constraints},
        {"scorer", c.search.scorer},
        {"strategy", c.search.strategy},
        {"init_population", e.init_population},
        {"mutate_size", e.mutate_size},
        {"crossover_size", e.crossover_size},
        {"iterations", e.iterations},
        {"mutation_prob", e.mutation_prob},
        {"parent_fraction", e.parent_fraction},
        {"max_retries", e.max_retries}}},
      {"out", c.out},
      {"svg", c.svg},
  };
}

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace detail

/// Missing keys keep their defaults; unknown top-level keys are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> known{"seed",     "space",      "sampler",    "oracle",
                                              "supernet", "predictor",  "training",   "strategies",
                                              "offline_pool_size",      "search",     "out", "svg"};
  if (!j.is_object()) throw Error("config: expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw Error("config: unknown key '" + k + "'");
  ExperimentConfig c;
  try {
    using detail::read_opt;
    read_opt(j, "seed", c.seed);
    if (j.contains("space")) read_opt(j["space"], "couple_stem_mb1", c.couple_stem_mb1);
    if (j.contains("sampler")) {
      const auto& s = j["sampler"];
      read_opt(s, "m", c.sampler_m);
      read_opt(s, "step", c.bin_step);
      read_opt(s, "chunks", c.sampler_chunks);
    }
    if (j.contains("oracle")) {
      const auto& o = j["oracle"];
      read_opt(o, "a", c.oracle.a);
      read_opt(o, "b", c.oracle.b);
      read_opt(o, "lambda", c.oracle.lambda);
      read_opt(o, "epsilon", c.oracle.epsilon);
      read_opt(o, "seed", c.oracle.seed);
    }
    if (j.contains("supernet")) {
      const auto& s = j["supernet"];
      read_opt(s, "s0", c.s0);
      read_opt(s, "eta", c.eta);
      read_opt(s, "early_steps", c.early_steps);
    }
    if (j.contains("predictor")) {
      const auto& p = j["predictor"];
      read_opt(p, "pairs", c.predictor.pairs);
      read_opt(p, "train", c.predictor.train);
      read_opt(p, "featurization", c.predictor.featurization);
      read_opt(p, "n_trees", c.predictor.forest.n_trees);
      read_opt(p, "max_depth", c.predictor.forest.max_depth);
      read_opt(p, "min_samples_leaf", c.predictor.forest.min_samples_leaf);
      read_opt(p, "bootstrap", c.predictor.forest.bootstrap);
    }
    if (j.contains("training")) {
      const auto& t = j["training"];
      read_opt(t, "steps", c.training.steps);
      read_opt(t, "snapshot_every", c.training.snapshot_every);
      read_opt(t, "probe_per_bucket", c.training.probe_per_bucket);
      read_opt(t, "bucket_width", c.training.bucket_width);
      read_opt(t, "noise_sigma", c.training.noise_sigma);
    }
    read_opt(j, "strategies", c.strategies);
    read_opt(j, "offline_pool_size", c.offline_pool_size);
    if (j.contains("search")) {
      const auto& s = j["search"];
      auto& e = c.search.evolution;
      read_opt(s, "constraints", c.search.constraints);
      read_opt(s, "scorer", c.search.scorer);
      read_opt(s, "strategy", c.search.strategy);
      read_opt(s, "init_population", e.init_population);
      read_opt(s, "mutate_size", e.mutate_size);
      read_opt(s, "crossover_size", e.crossover_size);
      read_opt(s, "iterations", e.iterations);
      read_opt(s, "mutation_prob", e.mutation_prob);
      read_opt(s, "parent_fraction", e.parent_fraction);
      read_opt(s, "max_retries", e.max_retries);
    }
    read_opt(j, "out", c.out);
    read_opt(j, "svg", c.svg);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("config " + path.string() + ": " + e.what());
  }
}

/// 16 hex digits of FNV-1a over the canonical config dump. The output
/// directory is excluded: it names where a run goes, not what it is.
inline std::string run_id(const ExperimentConfig& c) {
  auto j = config_to_json(c);
  j.erase("out");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

inline SearchSpace make_space(const ExperimentConfig& c) {
  auto t = default_template();
  t.couple_stem_mb1 = c.couple_stem_mb1;
  return SearchSpace::from_template(t);
}

inline Featurizer make_featurizer(const SearchSpace& space, const std::string& kind) {
  if (kind == "value") return {};
  if (kind != "one_hot") throw Error("predictor.featurization must be 'value' or 'one_hot'");
  std::vector<std::vector<int>> choices;
  for (const auto& a : space.axes()) choices.push_back(a.choices);
  return Featurizer::one_hot(std::move(choices));
}

/// Fits a forest on encoded architectures through `feat`; the returned
/// predictor featurizes its inputs the same way.
inline AccuracyPredictor fit_encoded(const std::vector<std::vector<int>>& encoded, const std::vector<double>& targets,
                                     const Featurizer& feat, const ForestConfig& cfg, std::uint64_t seed) {
  std::vector<TrainingPair> data;
  for (std::size_t i = 0; i < encoded.size(); ++i) data.push_back({feat(encoded[i]), targets[i]});
  auto model = fit_predictor(data, cfg, seed);
  model.set_featurizer(feat);
  return model;
}

// ---- strategy names ---------------------------------------------------------

struct StrategySpec {
  StrategyConfig config;
  bool offline = false;  // needs a pool from the predictor before use
};

/// Parses "Uniform", "BestUp-3 (loss)", "WorstUp-50 (acc)", "BestUp-1M (acc)".
inline StrategySpec parse_strategy(const std::string& name, double noise_sigma = 0.01) {
  static const std::regex re(R"(^(BestUp|WorstUp)-([0-9]+|1M) \((loss|acc)\)$)");
  StrategySpec spec;
  if (name == "Uniform") {
    spec.config = StrategyConfig::uniform();
    spec.config.noise_sigma = noise_sigma;
    return spec;
  }
  std::smatch m;
  if (!std::regex_match(name, m, re)) throw Error("unknown strategy '" + name + "'");
  const Strategy mode = m[1] == "BestUp" ? Strategy::BestUp : Strategy::WorstUp;
  const EstimatorKind est = m[3] == "loss" ? EstimatorKind::OracleLoss : EstimatorKind::PredictedAcc;
  if (m[2] == "1M") {
    if (est != EstimatorKind::PredictedAcc) throw Error("offline pools are scored by the predictor: " + name);
    spec.config = StrategyConfig::attentive(mode, est);
    spec.config.pool_label = "1M";
    spec.offline = true;
  } else {
    const int k = std::stoi(m[2]);
    spec.config = StrategyConfig::attentive(mode, est, k);
  }
  spec.config.noise_sigma = noise_sigma;
  spec.config.check();
  return spec;
}

/// File-name form: "BestUp-3 (loss)" -> "bestup-3-loss".
inline std::string strategy_slug(const std::string& name) {
  std::string out;
  for (char ch : name) {
    if (std::isalnum(static_cast<unsigned char>(ch)))
      out += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    else if (!out.empty() && out.back() != '-')
      out += '-';
  }
  while (!out.empty() && out.back() == '-') out.pop_back();
  return out;
}

inline nlohmann::json strategy_to_json(const StrategyConfig& s) {
  nlohmann::json j{{"name", s.name()},
                   {"mode", to_string(s.mode)},
                   {"k", s.k},
                   {"n", s.n},
                   {"estimator", to_string(s.estimator)},
                   {"noise_sigma", s.noise_sigma}};
  if (s.offline_pool) {
    j["offline_pool"] = {{"label", s.pool_label}, {"members", s.offline_pool->archs.size()}};
  }
  return j;
}

// ---- sampling and small file helpers ---------------------------------------

/// FLOPs-stratified draws: a populated bin uniformly at random, then a
/// factorized rejection sample inside it.
inline std::vector<ArchitectureConfig> sample_stratified(const SearchSpace& space, const SamplerTables& tables,
                                                         std::size_t n, Rng& rng,
                                                         long max_trials = kDefaultFactorizedTrials) {
  const auto bins = tables.prior.bins();
  if (bins.empty()) throw Error("sample_stratified: no populated bins");
  std::vector<ArchitectureConfig> out;
  out.reserve(n);
  std::size_t failures = 0;
  while (out.size() < n) {
    try {
      out.push_back(rejection_sample(space, tables.conditional, bins[uniform_index(rng, bins.size())],
                                     max_trials, rng)
                        .arch);
    } catch (const SamplingError&) {
      if (++failures > 100 + n) throw;
    }
  }
  return out;
}

/// Shortest text that reads back to exactly `v`.
inline std::string fmt_num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct CsvTable {
  std::string run_id;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("csv: missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

/// Reads our own CSV dialect: optional "# run_id: X" comment lines, a header,
/// then plain comma-separated rows (no quoting).
inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string tag = "# run_id: ";
      if (line.rfind(tag, 0) == 0) t.run_id = line.substr(tag.size());
      continue;
    }
    if (t.header.empty()) {
      t.header = split_csv_line(line);
    } else {
      t.rows.push_back(split_csv_line(line));
      if (t.rows.back().size() != t.header.size()) throw Error(path.string() + ": ragged row");
    }
  }
  if (t.header.empty()) throw Error(path.string() + ": no header");
  return t;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

inline nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

/// Pairs CSV: encoded features e0..e{d-1} plus FLOPs and accuracy.
inline std::string pairs_csv(const std::string& id, const SearchSpace& space,
                             const std::vector<ArchitectureConfig>& archs, const std::vector<double>& accuracy,
                             const std::vector<std::string>& extra_name = {},
                             const std::vector<std::vector<std::string>>& extra = {}) {
  std::ostringstream os;
  os << "# run_id: " << id << '\n' << "arch_id,mflops,accuracy";
  for (const auto& n : extra_name) os << ',' << n;
  for (std::size_t a = 0; a < space.num_axes(); ++a) os << ",e" << a;
  os << '\n';
  for (std::size_t i = 0; i < archs.size(); ++i) {
    os << arch_id(archs[i]) << ',' << fmt_num(arch_flops(space, archs[i]).value) << ',' << fmt_num(accuracy[i]);
    for (const auto& col : extra) os << ',' << col[i];
    for (int v : encode(space, archs[i])) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

struct EncodedPairs {
  std::vector<std::vector<int>> encoded;
  std::vector<double> accuracy;
};

inline EncodedPairs pairs_from_csv(const CsvTable& t) {
  std::vector<std::size_t> feat;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (t.header[c].size() > 1 && t.header[c][0] == 'e' && std::isdigit(static_cast<unsigned char>(t.header[c][1])))
      feat.push_back(c);
  if (feat.empty()) throw Error("pairs csv: no feature columns");
  const std::size_t acc = t.column("accuracy");
  EncodedPairs out;
  for (const auto& r : t.rows) {
    std::vector<int> e;
    for (auto c : feat) e.push_back(std::stoi(r[c]));
    out.encoded.push_back(std::move(e));
    out.accuracy.push_back(std::stod(r[acc]));
  }
  return out;
}

// ---- pipeline ---------------------------------------------------------------

struct PredictorStage {
  std::vector<ArchitectureConfig> archs;  // first `train` fit, remainder held out
  std::vector<double> early_acc;
  std::vector<double> late_acc;
  std::size_t n_train = 0;
  AccuracyPredictor model;
  double holdout_tau = 0.0;     // predictions vs early-state accuracy, held-out half
  double early_late_tau = 0.0;  // predictions vs late-state accuracy, held-out half
};

struct StrategyOutcome {
  std::string name;
  StrategyConfig strategy;
  TrainingRun run;
};

class Pipeline {
 public:
  explicit Pipeline(ExperimentConfig cfg, std::ostream* log = nullptr)
      : cfg_(std::move(cfg)), id_(run_id(cfg_)), log_(log) {
    stage("config", [&] {
      cfg_.oracle.check();
      cfg_.search.evolution.check();
      space_ = std::make_unique<SearchSpace>(make_space(cfg_));
      if (cfg_.predictor.train < 2 || cfg_.predictor.pairs <= cfg_.predictor.train)
        throw Error("predictor: need 2 <= train < pairs");
      if (cfg_.early_steps < 1) throw Error("early_steps must be >= 1");
      make_featurizer(*space_, cfg_.predictor.featurization);
      if (cfg_.search.scorer != "supernet" && cfg_.search.scorer != "predictor")
        throw Error("search.scorer must be 'supernet' or 'predictor'");
      for (const auto& s : cfg_.strategies) parse_strategy(s, cfg_.training.noise_sigma);
      return 0;
    });
  }

  const ExperimentConfig& config() const noexcept { return cfg_; }
  const std::string& id() const noexcept { return id_; }
  const SearchSpace& space() const noexcept { return *space_; }

  Rng rng(std::string_view name, std::uint64_t index = 0) const { return substream(cfg_.seed, name, index); }

  TrainingContext context(const AccuracyPredictor* pred = nullptr) {
    return TrainingContext{space_.get(), &tables(), cfg_.oracle, pred};
  }

  const SamplerTables& tables() {
    if (!tables_) {
      tables_ = stage("sampler", [&] {
        return build_tables(*space_, cfg_.sampler_m, FlopsBinning(cfg_.bin_step), cfg_.seed, cfg_.sampler_chunks);
      });
    }
    return *tables_;
  }

  void set_tables(SamplerTables t) { tables_ = std::move(t); }

  const SupernetState& early_state() {
    run_early();
    return *early_;
  }

  /// The early run continued for the full training length.
  const SupernetState& late_state() {
    run_early();
    return *late_;
  }

  const PredictorStage& predictor() {
    if (!pred_) {
      const auto& early = early_state();
      const auto& late = late_state();
      pred_ = stage("predictor", [&] {
        PredictorStage p;
        Rng r = rng("predictor.pairs");
        p.archs = sample_stratified(*space_, tables(), static_cast<std::size_t>(cfg_.predictor.pairs), r);
        p.n_train = static_cast<std::size_t>(cfg_.predictor.train);
        std::vector<std::vector<int>> train;
        for (std::size_t i = 0; i < p.archs.size(); ++i) {
          p.early_acc.push_back(eval_subnet(early, cfg_.oracle, *space_, p.archs[i]));
          p.late_acc.push_back(eval_subnet(late, cfg_.oracle, *space_, p.archs[i]));
          if (i < p.n_train) train.push_back(encode(*space_, p.archs[i]));
        }
        p.model = fit_encoded(train, std::vector<double>(p.early_acc.begin(), p.early_acc.begin() + p.n_train),
                              make_featurizer(*space_, cfg_.predictor.featurization), cfg_.predictor.forest,
                              cfg_.seed);
        std::vector<double> pred, e, l;
        for (std::size_t i = p.n_train; i < p.archs.size(); ++i) {
          const auto enc = encode(*space_, p.archs[i]);
          pred.push_back(p.model.predict(std::span<const int>(enc)));
          e.push_back(p.early_acc[i]);
          l.push_back(p.late_acc[i]);
        }
        p.holdout_tau = kendall_tau(pred, e);
        p.early_late_tau = kendall_tau(pred, l);
        return p;
      });
    }
    return *pred_;
  }

  const ProbeSet& probe() {
    if (!probe_) {
      probe_ = stage("training", [&] {
        Rng r = rng("probe");
        return make_probe_set(*space_, tables(), cfg_.oracle, r,
                              static_cast<std::size_t>(cfg_.training.probe_per_bucket), cfg_.training.bucket_width);
      });
    }
    return *probe_;
  }

  StrategyConfig resolve_strategy(const std::string& name) {
    auto spec = parse_strategy(name, cfg_.training.noise_sigma);
    if (spec.offline) {
      const int mode = spec.config.mode == Strategy::BestUp ? 0 : 1;
      if (!pools_[mode]) {
        const auto& model = predictor().model;
        pools_[mode] = stage("training", [&] {
          Rng r = rng("offline_pool");  // same draw for both modes
          return std::make_shared<const OfflinePool>(build_offline_pool(
              *space_, model, cfg_.offline_pool_size, spec.config.mode, FlopsBinning(cfg_.bin_step), r));
        });
      }
      spec.config.offline_pool = pools_[mode];
    }
    return spec.config;
  }

  /// Full training for one named strategy. Strategies share the training
  /// substream, so runs are paired.
  StrategyOutcome train(const std::string& name) {
    const auto strat = resolve_strategy(name);
    const AccuracyPredictor* model = strat.estimator == EstimatorKind::PredictedAcc ? &predictor().model : nullptr;
    const auto& pr = probe();
    return stage("training", [&] {
      auto ctx = context(model);
      Rng r = rng("training");
      auto run = run_training(ctx, strat, cfg_.training.steps, cfg_.training.snapshot_every, pr, r,
                              SupernetState::initial(*space_, cfg_.s0, cfg_.eta));
      return StrategyOutcome{name, strat, std::move(run)};
    });
  }

  const std::vector<StrategyOutcome>& training() { return training(cfg_.strategies); }

  /// Trains the named strategies once; later calls return the cached runs.
  const std::vector<StrategyOutcome>& training(const std::vector<std::string>& names) {
    if (!runs_) {
      std::vector<StrategyOutcome> out;
      for (const auto& s : names) {
        const auto t0 = std::chrono::steady_clock::now();
        out.push_back(train(s));
        note("training " + s, t0);
      }
      runs_ = std::move(out);
    }
    return *runs_;
  }

  ScoreFn scorer() {
    if (cfg_.search.scorer == "predictor") {
      const auto* model = &predictor().model;
      const auto* sp = space_.get();
      return [model, sp](const ArchitectureConfig& a) {
        const auto enc = encode(*sp, a);
        return model->predict(std::span<const int>(enc));
      };
    }
    const SupernetState* state = nullptr;
    if (runs_)
      for (const auto& r : *runs_)
        if (r.name == cfg_.search.strategy) state = &r.run.state;
    if (!state) {
      if (!extra_run_) extra_run_ = train(cfg_.search.strategy);
      state = &extra_run_->run.state;
    }
    const auto oracle = cfg_.oracle;
    const auto* sp = space_.get();
    return [state, oracle, sp](const ArchitectureConfig& a) { return eval_subnet(*state, oracle, *sp, a); };
  }

  const EvolutionResult& search() {
    if (!search_) {
      auto fn = scorer();
      search_ = stage("search", [&] {
        return evolutionary_search(fn, *space_, tables(), cfg_.search.evolution, cfg_.search.constraints,
                                   cfg_.seed);
      });
    }
    return *search_;
  }

  // ---- artifacts ----

  void write_tables(const std::filesystem::path& dir) {
    auto j = tables_to_json(tables());
    j["run_id"] = id_;
    emit(dir, "tables.json", j.dump() + "\n");
  }

  void write_predictor(const std::filesystem::path& dir) {
    const auto& p = predictor();
    std::vector<std::string> split;
    for (std::size_t i = 0; i < p.archs.size(); ++i) split.push_back(i < p.n_train ? "train" : "test");
    std::vector<std::string> late;
    for (double v : p.late_acc) late.push_back(fmt_num(v));
    emit(dir, "pairs.csv", pairs_csv(id_, *space_, p.archs, p.early_acc, {"split", "late_accuracy"}, {split, late}));
    auto model = predictor_to_json(p.model);
    model["run_id"] = id_;
    emit(dir, "predictor.json", model.dump() + "\n");
    nlohmann::json tau{{"run_id", id_},
                       {"n_train", p.n_train},
                       {"n_test", p.archs.size() - p.n_train},
                       {"holdout_tau", p.holdout_tau},
                       {"early_vs_late_tau", p.early_late_tau},
                       {"early_steps", cfg_.early_steps},
                       {"late_steps", std::max(cfg_.early_steps, cfg_.training.steps)}};
    emit(dir, "tau.json", tau.dump(2) + "\n");
  }

  void write_training(const std::filesystem::path& dir) {
    for (const auto& r : training()) {
      const auto slug = strategy_slug(r.name);
      std::ostringstream traj;
      traj << "# run_id: " << id_ << '\n' << std::setprecision(17);
      write_trajectory_csv(traj, r.run.trajectory);
      emit(dir, "trajectory_" + slug + ".csv", traj.str());
      std::ostringstream fr;
      fr << "# run_id: " << id_ << '\n' << std::setprecision(17);
      write_front_csv(fr, r.run.trajectory.snapshots.back().fronts);
      emit(dir, "fronts_" + slug + ".csv", fr.str());
    }
  }

  void write_search(const std::filesystem::path& dir) {
    const auto& res = search();
    std::ostringstream os;
    os << "# run_id: " << id_ << '\n'
       << "constraint,arch_id,mflops,score,evaluated_count,unique_evaluations,fallbacks\n";
    for (const auto& run : res.runs) {
      os << fmt_num(run.constraint) << ',' << arch_id(run.best.arch) << ',' << fmt_num(run.best.flops) << ','
         << fmt_num(run.best.score) << ',' << run.evaluated_count << ',' << run.unique_evaluations << ','
         << run.fallbacks << '\n';
      nlohmann::json j{{"run_id", id_},
                       {"constraint", run.constraint},
                       {"scorer", cfg_.search.scorer},
                       {"score", run.best.score},
                       {"mflops", run.best.flops},
                       {"history", run.history},
                       {"arch", arch_to_json(*space_, run.best.arch)}};
      emit(dir, "best_" + fmt_num(run.constraint) + ".json", j.dump(2) + "\n");
    }
    emit(dir, "search.csv", os.str());
  }

  void write_manifest(const std::filesystem::path& dir) {
    // Lists the strategies trained so far; subcommands may run only a subset.
    nlohmann::json strategies = nlohmann::json::array();
    if (runs_)
      for (const auto& r : *runs_) strategies.push_back(strategy_to_json(r.strategy));
    std::sort(files_.begin(), files_.end());
    files_.erase(std::unique(files_.begin(), files_.end()), files_.end());
    nlohmann::json j{{"run_id", id_},
                     {"config", config_to_json(cfg_)},
                     {"strategies", strategies},
                     {"substreams",
                      {"sampler.chunk", "early", "predictor.pairs", "forest.tree", "probe", "offline_pool", "training",
                       "evolution.constraint"}},
                     {"files", files_}};
    j["config"].erase("out");
    write_text(dir / "manifest.json", j.dump(2) + "\n");
  }

  /// Runs every stage and writes all artifacts into `dir`.
  void run_all(const std::filesystem::path& dir) {
    stage("output", [&] {
      std::filesystem::create_directories(dir);
      return 0;
    });
    auto t0 = std::chrono::steady_clock::now();
    write_tables(dir);
    note("sampler", t0);
    t0 = std::chrono::steady_clock::now();
    write_predictor(dir);
    note("predictor", t0);
    write_training(dir);
    t0 = std::chrono::steady_clock::now();
    write_search(dir);
    note("search", t0);
    write_manifest(dir);
    stage("report", [&] {
      const auto rep = render_report(dir);
      write_text(dir / "report.md", rep);
      if (cfg_.svg) write_text(dir / "buckets.svg", render_svg(dir));
      return 0;
    });
  }

  // Report and figure: pure functions of the persisted files.
  static std::string render_report(const std::filesystem::path& dir);
  static std::string render_svg(const std::filesystem::path& dir);

 private:
  void run_early() {
    if (early_) return;
    stage("early", [&] {
      auto ctx = context();
      Rng r = rng("early");
      auto st = SupernetState::initial(*space_, cfg_.s0, cfg_.eta);
      const long late = std::max(cfg_.early_steps, cfg_.training.steps);
      for (long s = 1; s <= late; ++s) {
        train_step(st, ctx, StrategyConfig::uniform(), r);
        if (s == cfg_.early_steps) early_ = st;
      }
      late_ = std::move(st);
      return 0;
    });
  }

  template <class F>
  auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  void emit(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
    stage("output", [&] {
      write_text(dir / name, text);
      return 0;
    });
    files_.push_back(name);
  }

  void note(const std::string& what, std::chrono::steady_clock::time_point t0) const {
    if (!log_) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    *log_ << "[attsample] " << what << ": " << std::fixed << std::setprecision(1) << s << " s\n" << std::defaultfloat;
  }

  ExperimentConfig cfg_;
  std::string id_;
  std::ostream* log_ = nullptr;
  std::unique_ptr<SearchSpace> space_;
  std::optional<SamplerTables> tables_;
  std::optional<SupernetState> early_, late_;
  std::optional<PredictorStage> pred_;
  std::optional<ProbeSet> probe_;
  std::shared_ptr<const OfflinePool> pools_[2];
  std::optional<std::vector<StrategyOutcome>> runs_;
  std::optional<StrategyOutcome> extra_run_;
  std::optional<EvolutionResult> search_;
  std::vector<std::string> files_;
};

// ---- report ------------------------------------------------------------------

namespace detail {

struct StrategySummary {
  std::string name;
  std::string slug;
  double lowest_bucket = 0.0;
  double lowest_min = 0.0;
  double top_best_max = 0.0;  // best-front max at >= 400 MFLOPs
  long final_step = 0;
};

inline StrategySummary summarize(const std::filesystem::path& dir, const std::string& name, const std::string& id) {
  StrategySummary s;
  s.name = name;
  s.slug = strategy_slug(name);
  const auto traj = read_csv(dir / ("trajectory_" + s.slug + ".csv"));
  const auto fronts = read_csv(dir / ("fronts_" + s.slug + ".csv"));
  if (traj.run_id != id || fronts.run_id != id) throw Error("run id mismatch in artifacts of " + name);
  const auto cs = traj.column("step"), clo = traj.column("bucket_lo"), cmin = traj.column("min"),
             ccount = traj.column("count");
  for (const auto& r : traj.rows) s.final_step = std::max(s.final_step, std::stol(r[cs]));
  bool found = false;
  for (const auto& r : traj.rows) {
    if (std::stol(r[cs]) != s.final_step || std::stol(r[ccount]) == 0) continue;
    const double lo = std::stod(r[clo]);
    if (!found || lo < s.lowest_bucket) {
      s.lowest_bucket = lo;
      s.lowest_min = std::stod(r[cmin]);
      found = true;
    }
  }
  const auto cf = fronts.column("front"), cfl = fronts.column("flops"), csc = fronts.column("score");
  for (const auto& r : fronts.rows)
    if (r[cf] == "best" && std::stod(r[cfl]) >= 400.0) s.top_best_max = std::max(s.top_best_max, std::stod(r[csc]));
  return s;
}

inline std::vector<StrategySummary> summaries(const std::filesystem::path& dir, nlohmann::json& manifest) {
  manifest = read_json(dir / "manifest.json");
  const std::string id = manifest.at("run_id").get<std::string>();
  std::vector<StrategySummary> out;
  for (const auto& s : manifest.at("strategies")) out.push_back(summarize(dir, s.at("name").get<std::string>(), id));
  return out;
}

}  // namespace detail

inline std::string Pipeline::render_report(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  const auto sums = detail::summaries(dir, manifest);
  const std::string id = manifest.at("run_id").get<std::string>();
  const auto tau = read_json(dir / "tau.json");
  if (tau.at("run_id") != id) throw Error("run id mismatch in tau.json");
  std::ostringstream os;
  os << std::setprecision(6);
  os << "# attsample run " << id << "\n\n";
  os << "## Predictor\n\n";
  os << "- pairs: " << tau.at("n_train") << " train / " << tau.at("n_test") << " held out\n";
  os << "- Kendall tau, held out (early state): " << fmt_num(tau.at("holdout_tau").get<double>()) << "\n";
  os << "- Kendall tau, early predictor vs late state: " << fmt_num(tau.at("early_vs_late_tau").get<double>())
     << "\n\n";
  os << "## Training (final snapshot)\n\n";
  os << "| strategy | step | lowest bucket | min accuracy there | best-front max (>= 400 MFLOPs) |\n";
  os << "|---|---|---|---|---|\n";
  for (const auto& s : sums)
    os << "| " << s.name << " | " << s.final_step << " | " << fmt_num(s.lowest_bucket) << " | "
       << fmt_num(s.lowest_min) << " | " << fmt_num(s.top_best_max) << " |\n";
  const auto search = read_csv(dir / "search.csv");
  if (search.run_id != id) throw Error("run id mismatch in search.csv");
  os << "\n## Search (" << manifest.at("config").at("search").at("scorer").get<std::string>() << " scorer)\n\n";
  os << "| constraint | MFLOPs | score | evaluated |\n|---|---|---|---|\n";
  const auto cc = search.column("constraint"), cm = search.column("mflops"), cs = search.column("score"),
             ce = search.column("evaluated_count");
  for (const auto& r : search.rows) os << "| " << r[cc] << " | " << r[cm] << " | " << r[cs] << " | " << r[ce] << " |\n";
  return os.str();
}

inline std::string Pipeline::render_svg(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  const auto sums = detail::summaries(dir, manifest);
  const std::string id = manifest.at("run_id").get<std::string>();
  // Final-snapshot box plots per bucket, one colour per strategy.
  struct Box {
    double lo, min, q1, med, q3, max;
  };
  std::vector<std::vector<Box>> boxes;
  double xlo = 1e18, xhi = -1e18, ylo = 1e18, yhi = -1e18, width = 50;
  for (const auto& s : sums) {
    const auto t = read_csv(dir / ("trajectory_" + s.slug + ".csv"));
    std::vector<Box> b;
    for (const auto& r : t.rows) {
      if (std::stol(r[t.column("step")]) != s.final_step || std::stol(r[t.column("count")]) == 0) continue;
      Box x{std::stod(r[t.column("bucket_lo")]), std::stod(r[t.column("min")]), std::stod(r[t.column("q1")]),
            std::stod(r[t.column("median")]),    std::stod(r[t.column("q3")]),  std::stod(r[t.column("max")])};
      width = std::stod(r[t.column("bucket_hi")]) - x.lo;
      xlo = std::min(xlo, x.lo);
      xhi = std::max(xhi, x.lo + width);
      ylo = std::min(ylo, x.min);
      yhi = std::max(yhi, x.max);
      b.push_back(x);
    }
    boxes.push_back(std::move(b));
  }
  if (boxes.empty() || xhi <= xlo) return "<svg xmlns=\"http://www.w3.org/2000/svg\"/>\n";
  if (yhi <= ylo) yhi = ylo + 1e-3;
  const double W = 960, H = 420, L = 60, R = 20, T = 30, B = 40;
  auto px = [&](double x) { return L + (x - xlo) / (xhi - xlo) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ylo) / (yhi - ylo) * (H - T - B); };
  static const char* colours[] = {"#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3"};
  std::ostringstream os;
  os << std::setprecision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<!-- run_id: " << id << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  for (double x = xlo; x <= xhi + 1e-9; x += 4 * width)
    os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 16 << "\" font-size=\"11\" text-anchor=\"middle\">" << x
       << "</text>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 6 << "\" font-size=\"12\" text-anchor=\"middle\">MFLOPs</text>\n";
  os << "<text x=\"" << L - 8 << "\" y=\"" << py(yhi) << "\" font-size=\"11\" text-anchor=\"end\">" << yhi
     << "</text>\n";
  os << "<text x=\"" << L - 8 << "\" y=\"" << py(ylo) << "\" font-size=\"11\" text-anchor=\"end\">" << ylo
     << "</text>\n";
  const double slot = (px(xlo + width) - px(xlo)) / static_cast<double>(boxes.size() + 1);
  for (std::size_t s = 0; s < boxes.size(); ++s) {
    const char* c = colours[s % 7];
    for (const auto& b : boxes[s]) {
      const double x = px(b.lo) + slot * (static_cast<double>(s) + 0.5);
      os << "<line x1=\"" << x + slot / 2 << "\" y1=\"" << py(b.max) << "\" x2=\"" << x + slot / 2 << "\" y2=\""
         << py(b.min) << "\" stroke=\"" << c << "\"/>\n";
      os << "<rect x=\"" << x << "\" y=\"" << py(b.q3) << "\" width=\"" << slot << "\" height=\""
         << std::max(0.5, py(b.q1) - py(b.q3)) << "\" fill=\"" << c << "\" fill-opacity=\"0.5\" stroke=\"" << c
         << "\"/>\n";
      os << "<line x1=\"" << x << "\" y1=\"" << py(b.med) << "\" x2=\"" << x + slot << "\" y2=\"" << py(b.med)
         << "\" stroke=\"black\"/>\n";
    }
    os << "<text x=\"" << L + 10 << "\" y=\"" << T + 14 * static_cast<double>(s) << "\" font-size=\"12\" fill=\"" << c
       << "\">" << sums[s].name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace attsample
