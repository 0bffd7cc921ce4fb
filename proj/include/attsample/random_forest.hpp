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
 * \file random_forest.hpp
 * \brief Bagged squared-error regression trees: the accuracy predictor.
 *
 * Every node scans all features; candidate thresholds are midpoints between
 * consecutive distinct values. A node becomes a leaf at max depth, when its
 * targets are constant, when it holds a single sample, or when no threshold
 * separates its samples.
 */
#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "attsample/random.hpp"

namespace attsample {

/// Maps an encoded architecture (one choice value per axis) to features.
/// Value encoding feeds the choice values as they are; one-hot emits one
/// indicator per (axis, choice) for the listed choices.
struct Featurizer {
  enum class Kind { Value, OneHot };
  Kind kind = Kind::Value;
  std::vector<std::vector<int>> choices;  // per axis; one-hot only

  static Featurizer one_hot(std::vector<std::vector<int>> per_axis_choices) {
    Featurizer f;
    f.kind = Kind::OneHot;
    f.choices = std::move(per_axis_choices);
    return f;
  }

  std::size_t width(std::size_t n_axes) const {
    if (kind == Kind::Value) return n_axes;
    std::size_t w = 0;
    for (const auto& c : choices) w += c.size();
    return w;
  }

  std::vector<double> operator()(std::span<const int> encoded) const {
    if (kind == Kind::Value) return {encoded.begin(), encoded.end()};
    if (encoded.size() != choices.size()) throw Error("featurize: axis count mismatch");
    std::vector<double> x(width(choices.size()), 0.0);
    std::size_t off = 0;
    for (std::size_t a = 0; a < choices.size(); ++a) {
      auto it = std::find(choices[a].begin(), choices[a].end(), encoded[a]);
      if (it == choices[a].end()) throw Error("featurize: value " + std::to_string(encoded[a]) + " not a choice");
      x[off + static_cast<std::size_t>(it - choices[a].begin())] = 1.0;
      off += choices[a].size();
    }
    return x;
  }
};

struct TrainingPair {
  std::vector<double> features;
  double target = 0.0;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 15;
  int min_samples_leaf = 1;
  bool bootstrap = true;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf mean

  bool is_leaf() const noexcept { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  /// Grows the tree on rows `sample` of `data` (indices may repeat).
  static RegressionTree fit(std::span<const TrainingPair> data, std::vector<std::size_t> sample, int max_depth,
                            int min_samples_leaf) {
    RegressionTree t;
    if (sample.empty()) throw Error("regression tree: empty sample");
    t.grow(data, sample, 0, sample.size(), 0, max_depth, std::max(1, min_samples_leaf));
    return t;
  }

  double predict(std::span<const double> x) const {
    const TreeNode* n = &nodes_.front();
    while (!n->is_leaf()) n = &nodes_[x[n->feature] <= n->threshold ? n->left : n->right];
    return n->value;
  }

  int depth() const { return nodes_.empty() ? 0 : depth_from(0); }
  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

 private:
  int depth_from(int i) const {
    const auto& n = nodes_[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(n.left), depth_from(n.right));
  }

  int grow(std::span<const TrainingPair> data, std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
           int depth, int max_depth, int min_leaf) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    const std::size_t n = hi - lo;
    double sum = 0.0;
    double tmin = data[idx[lo]].target, tmax = tmin;
    for (std::size_t i = lo; i < hi; ++i) {
      const double t = data[idx[i]].target;
      sum += t;
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    nodes_[id].value = tmin == tmax ? tmin : std::clamp(sum / static_cast<double>(n), tmin, tmax);
    if (depth >= max_depth || n < 2 || tmin == tmax || n < 2 * static_cast<std::size_t>(min_leaf)) return id;

    const std::size_t d = data[idx[lo]].features.size();
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_gain = -1.0;
    std::vector<std::size_t> order(idx.begin() + lo, idx.begin() + hi);
    for (std::size_t f = 0; f < d; ++f) {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return data[a].features[f] < data[b].features[f]; });
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += data[order[i]].target;
        const double xv = data[order[i]].features[f];
        const double xn = data[order[i + 1]].features[f];
        if (xv == xn) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < static_cast<std::size_t>(min_leaf) || nr < static_cast<std::size_t>(min_leaf)) continue;
        const double right_sum = sum - left_sum;
        // SSE reduction up to the constant sum^2/n.
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (xv + xn);
        }
      }
    }
    if (best_feature < 0) return id;

    auto mid_it = std::stable_partition(idx.begin() + lo, idx.begin() + hi, [&](std::size_t r) {
      return data[r].features[best_feature] <= best_threshold;
    });
    const std::size_t mid = static_cast<std::size_t>(mid_it - idx.begin());
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    const int l = grow(data, idx, lo, mid, depth + 1, max_depth, min_leaf);
    const int r = grow(data, idx, mid, hi, depth + 1, max_depth, min_leaf);
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  std::vector<TreeNode> nodes_;
};

class AccuracyPredictor {
 public:
  AccuracyPredictor() = default;
  AccuracyPredictor(std::vector<RegressionTree> trees, std::size_t n_features, ForestConfig config,
                    std::uint64_t seed, std::size_t n_samples)
      : trees_(std::move(trees)), n_features_(n_features), config_(config), seed_(seed), n_samples_(n_samples) {}

  double predict(std::span<const double> x) const {
    if (x.size() != n_features_)
      throw Error("predict: expected " + std::to_string(n_features_) + " features, got " + std::to_string(x.size()));
    if (trees_.empty()) throw Error("predict: empty forest");
    // Running mean: exact when all trees agree, and never leaves [min, max].
    double m = 0.0;
    double k = 0.0;
    for (const auto& t : trees_) m += (t.predict(x) - m) / ++k;
    return m;
  }

  /// Featurizes an encoded architecture, then predicts.
  double predict(std::span<const int> encoded) const {
    const auto x = featurizer_(encoded);
    return predict(std::span<const double>(x));
  }

  const Featurizer& featurizer() const noexcept { return featurizer_; }
  void set_featurizer(Featurizer f) { featurizer_ = std::move(f); }

  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const ForestConfig& config() const noexcept { return config_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t n_samples() const noexcept { return n_samples_; }

 private:
  std::vector<RegressionTree> trees_;
  std::size_t n_features_ = 0;
  ForestConfig config_;
  std::uint64_t seed_ = 0;
  std::size_t n_samples_ = 0;
  Featurizer featurizer_;
};

/// Fits the forest. Tree t bootstraps from its own substream, so results do
/// not depend on the thread count.
inline AccuracyPredictor fit_predictor(std::span<const TrainingPair> data, const ForestConfig& cfg,
                                       std::uint64_t seed) {
  if (data.empty()) throw Error("fit_predictor: no training pairs");
  if (cfg.n_trees < 1 || cfg.max_depth < 0) throw Error("fit_predictor: invalid forest configuration");
  const std::size_t d = data.front().features.size();
  for (const auto& p : data)
    if (p.features.size() != d) throw Error("fit_predictor: inconsistent feature dimension");

  const std::size_t n = data.size();
  std::vector<RegressionTree> trees(cfg.n_trees);
  auto fit_one = [&](int t) {
    std::vector<std::size_t> sample(n);
    if (cfg.bootstrap) {
      Rng rng = substream(seed, "forest.tree", static_cast<std::uint64_t>(t));
      for (auto& s : sample) s = uniform_index(rng, n);
    } else {
      std::iota(sample.begin(), sample.end(), 0);
    }
    trees[t] = RegressionTree::fit(data, std::move(sample), cfg.max_depth, cfg.min_samples_leaf);
  };
  unsigned workers = cfg.threads ? cfg.threads : std::thread::hardware_concurrency();
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(cfg.n_trees)));
  if (workers == 1) {
    for (int t = 0; t < cfg.n_trees; ++t) fit_one(t);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int t = static_cast<int>(w); t < cfg.n_trees; t += static_cast<int>(workers)) fit_one(t);
      });
  }
  return AccuracyPredictor(std::move(trees), d, cfg, seed, n);
}

inline AccuracyPredictor fit_predictor(std::span<const TrainingPair> data, const ForestConfig& cfg, Rng& rng) {
  return fit_predictor(data, cfg, static_cast<std::uint64_t>(rng()));
}

// ---- persistence -----------------------------------------------------------

inline constexpr int kForestFormatVersion = 1;

inline nlohmann::json predictor_to_json(const AccuracyPredictor& p) {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : p.trees()) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes()) {
      if (n.is_leaf())
        nodes.push_back({{"leaf_value", n.value}});
      else
        nodes.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right}});
    }
    trees.push_back(std::move(nodes));
  }
  return {{"format", "attsample.forest"},
          {"version", kForestFormatVersion},
          {"n_features", p.n_features()},
          {"seed", p.seed()},
          {"n_samples", p.n_samples()},
          {"n_trees", p.config().n_trees},
          {"max_depth", p.config().max_depth},
          {"min_samples_leaf", p.config().min_samples_leaf},
          {"bootstrap", p.config().bootstrap},
          {"featurization", p.featurizer().kind == Featurizer::Kind::Value ? "value" : "one_hot"},
          {"choices", p.featurizer().choices},
          {"trees", std::move(trees)}};
}

inline AccuracyPredictor predictor_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "attsample.forest") throw Error("not a forest document");
    if (j.at("version").get<int>() != kForestFormatVersion)
      throw Error("unsupported forest format version " + j.at("version").dump());
    ForestConfig cfg;
    cfg.n_trees = j.at("n_trees").get<int>();
    cfg.max_depth = j.at("max_depth").get<int>();
    cfg.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    cfg.bootstrap = j.at("bootstrap").get<bool>();
    std::vector<RegressionTree> trees;
    for (const auto& jt : j.at("trees")) {
      std::vector<TreeNode> nodes;
      for (const auto& jn : jt) {
        TreeNode n;
        if (jn.contains("leaf_value")) {
          n.value = jn.at("leaf_value").get<double>();
        } else {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
        nodes.push_back(n);
      }
      const int count = static_cast<int>(nodes.size());
      for (const auto& n : nodes)
        if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count))
          throw Error("forest JSON: child index out of range");
      if (nodes.empty()) throw Error("forest JSON: empty tree");
      trees.emplace_back(std::move(nodes));
    }
    AccuracyPredictor p(std::move(trees), j.at("n_features").get<std::size_t>(), cfg,
                        j.at("seed").get<std::uint64_t>(), j.at("n_samples").get<std::size_t>());
    const std::string kind = j.value("featurization", "value");
    if (kind == "one_hot") {
      p.set_featurizer(Featurizer::one_hot(j.at("choices").get<std::vector<std::vector<int>>>()));
    } else if (kind != "value") {
      throw Error("forest JSON: unknown featurization '" + kind + "'");
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed forest JSON: ") + e.what());
  }
}

}  // namespace attsample
