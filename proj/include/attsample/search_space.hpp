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
 * \file search_space.hpp
 * \brief Stage-wise mobile search space: axes, architectures, encoding.
 *
 * An architecture is a vector of choice indices, one per axis. The network
 * layout (stem, MBConv stages, MBPool head) maps every structural attribute
 * either onto an axis or onto a fixed value, so reduced spaces for testing
 * are built by fixing attributes of the default template.
 */
#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <nlohmann/json.hpp>

#include "attsample/random.hpp"

namespace attsample {

struct ChoiceAxis {
  std::string name;
  std::vector<int> choices;

  std::size_t size() const noexcept { return choices.size(); }
  int min_value() const { return choices.front(); }
  int max_value() const { return choices.back(); }
};

/// One point in the search space: a choice index per axis, in axis order.
struct ArchitectureConfig {
  std::vector<int> choice_indices;

  friend auto operator<=>(const ArchitectureConfig&, const ArchitectureConfig&) = default;
  friend bool operator==(const ArchitectureConfig&, const ArchitectureConfig&) = default;
};

struct ArchitectureHash {
  std::size_t operator()(const ArchitectureConfig& a) const noexcept {
    return static_cast<std::size_t>(hash_combine(0, a.choice_indices));
  }
};

/// An attribute of the template: searchable knobs become axes, fixed knobs
/// must carry exactly one value.
struct Knob {
  std::vector<int> choices;
  bool searchable = true;
};

struct StageTemplate {
  Knob width;
  Knob depth;
  Knob kernel;
  Knob expansion;
  int stride = 1;
  bool se = false;
};

struct SpaceTemplate {
  Knob resolution;
  Knob stem_width;
  std::vector<StageTemplate> stages;
  Knob mbpool_width;
  int stem_kernel = 3;
  int stem_stride = 2;
  int head_expansion = 6;
  int class_count = 1000;
  // Share one axis between the stem width and the first stage's width.
  bool couple_stem_mb1 = false;
};

/// Where an attribute's value comes from: an axis, or a constant.
struct Slot {
  int axis = -1;
  int fixed = 0;

  bool searchable() const noexcept { return axis >= 0; }
};

struct StageMeta {
  Slot width, depth, kernel, expansion;
  int stride = 1;
  bool se = false;
};

struct NetworkLayout {
  Slot resolution;
  Slot stem_width;
  std::vector<StageMeta> stages;
  Slot mbpool_width;
  int stem_kernel = 3;
  int stem_stride = 2;
  int head_expansion = 6;
};

/// Fully resolved per-stage attributes of one architecture.
struct StageConfig {
  int width = 0;
  int depth = 0;
  int kernel = 0;
  int expansion = 0;
  int stride = 1;
  bool se = false;

  friend bool operator==(const StageConfig&, const StageConfig&) = default;
};

struct NetworkConfig {
  int resolution = 0;
  int stem_width = 0;
  int stem_kernel = 3;
  int stem_stride = 2;
  std::vector<StageConfig> stages;
  int mbpool_width = 0;
  int head_expansion = 6;
  int class_count = 1000;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct Violation {
  std::string axis;
  std::string message;
  long index = -1;
};

class SearchSpace {
 public:
  /// Generic space over bare axes. Has no network layout, so FLOPs cannot
  /// be computed for it.
  explicit SearchSpace(std::vector<ChoiceAxis> axes, int class_count = 1000)
      : axes_(std::move(axes)), class_count_(class_count) {
    check_axes();
  }

  static SearchSpace from_template(const SpaceTemplate& t) {
    SearchSpace space;
    space.class_count_ = t.class_count;
    NetworkLayout layout;
    layout.stem_kernel = t.stem_kernel;
    layout.stem_stride = t.stem_stride;
    layout.head_expansion = t.head_expansion;
    layout.resolution = space.add_knob("resolution", t.resolution);
    layout.stem_width = space.add_knob("stem.width", t.stem_width);
    for (std::size_t s = 0; s < t.stages.size(); ++s) {
      const auto& st = t.stages[s];
      const std::string prefix = "mb" + std::to_string(s + 1) + ".";
      StageMeta meta;
      if (s == 0 && t.couple_stem_mb1) {
        if (st.width.choices != t.stem_width.choices)
          throw Error("coupled stem/mb1 widths need identical choice lists");
        meta.width = layout.stem_width;
      } else {
        meta.width = space.add_knob(prefix + "width", st.width);
      }
      meta.depth = space.add_knob(prefix + "depth", st.depth);
      meta.kernel = space.add_knob(prefix + "kernel", st.kernel);
      meta.expansion = space.add_knob(prefix + "expansion", st.expansion);
      meta.stride = st.stride;
      meta.se = st.se;
      if (st.stride < 1) throw Error("stage stride must be positive");
      layout.stages.push_back(meta);
    }
    layout.mbpool_width = space.add_knob("mbpool.width", t.mbpool_width);
    space.layout_ = std::move(layout);
    space.check_axes();
    return space;
  }

  const std::vector<ChoiceAxis>& axes() const noexcept { return axes_; }
  std::size_t num_axes() const noexcept { return axes_.size(); }
  int class_count() const noexcept { return class_count_; }
  bool has_layout() const noexcept { return layout_.has_value(); }

  const NetworkLayout& layout() const {
    if (!layout_) throw Error("search space has no network layout");
    return *layout_;
  }

  std::optional<std::size_t> find_axis(const std::string& name) const {
    for (std::size_t i = 0; i < axes_.size(); ++i)
      if (axes_[i].name == name) return i;
    return std::nullopt;
  }

  const ChoiceAxis& axis(const std::string& name) const {
    auto i = find_axis(name);
    if (!i) throw Error("unknown axis: " + name);
    return axes_[*i];
  }

  int value(const ArchitectureConfig& arch, const Slot& slot) const {
    if (!slot.searchable()) return slot.fixed;
    return axes_[slot.axis].choices[arch.choice_indices[slot.axis]];
  }

 private:
  SearchSpace() = default;

  Slot add_knob(const std::string& name, const Knob& knob) {
    if (knob.choices.empty()) throw Error("empty choice list for " + name);
    if (!knob.searchable) {
      if (knob.choices.size() != 1) throw Error("fixed knob needs exactly one value: " + name);
      return Slot{-1, knob.choices.front()};
    }
    axes_.push_back(ChoiceAxis{name, knob.choices});
    return Slot{static_cast<int>(axes_.size() - 1), 0};
  }

  void check_axes() const {
    for (const auto& a : axes_) {
      if (a.choices.empty()) throw Error("axis " + a.name + " has no choices");
      if (!std::is_sorted(a.choices.begin(), a.choices.end(), std::less_equal<>{}) ||
          std::adjacent_find(a.choices.begin(), a.choices.end()) != a.choices.end())
        throw Error("axis " + a.name + " choices must be strictly increasing");
    }
  }

  std::vector<ChoiceAxis> axes_;
  std::optional<NetworkLayout> layout_;
  int class_count_ = 1000;
};

/// The mobile template: stem, seven MBConv stages, MBPool head.
inline SpaceTemplate default_template() {
  SpaceTemplate t;
  t.resolution = {{192, 224, 256, 288}};
  t.stem_width = {{16, 24}};
  const Knob k35{{3, 5}};
  const Knob e456{{4, 5, 6}};
  // Strides follow the usual MobileNetV3-style meta-architecture.
  t.stages = {
      {{{16, 24}}, {{1, 2}}, k35, {{1}, false}, 1, false},
      {{{24, 32}}, {{3, 4, 5}}, k35, e456, 2, false},
      {{{32, 40}}, {{3, 4, 5, 6}}, k35, e456, 2, true},
      {{{64, 72}}, {{3, 4, 5, 6}}, k35, e456, 2, false},
      {{{112, 120, 128}}, {{3, 4, 5, 6, 7, 8}}, k35, e456, 1, true},
      {{{192, 200, 208, 216}}, {{3, 4, 5, 6, 7, 8}}, k35, {{6}, false}, 2, true},
      {{{216, 224}}, {{1, 2}}, k35, {{6}, false}, 1, true},
  };
  t.mbpool_width = {{1792, 1984}};
  t.head_expansion = 6;
  t.class_count = 1000;
  return t;
}

inline SearchSpace default_space() { return SearchSpace::from_template(default_template()); }

inline std::vector<Violation> validate(const SearchSpace& space, const ArchitectureConfig& arch) {
  std::vector<Violation> out;
  if (arch.choice_indices.size() != space.num_axes()) {
    out.push_back({"", "length mismatch: expected " + std::to_string(space.num_axes()) + ", got " +
                           std::to_string(arch.choice_indices.size()),
                   static_cast<long>(arch.choice_indices.size())});
    return out;
  }
  for (std::size_t i = 0; i < space.num_axes(); ++i) {
    const int idx = arch.choice_indices[i];
    const auto& axis = space.axes()[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= axis.size())
      out.push_back({axis.name, axis.name + " index out of range", idx});
  }
  return out;
}

inline bool is_valid(const SearchSpace& space, const ArchitectureConfig& arch) {
  return validate(space, arch).empty();
}

inline void require_valid(const SearchSpace& space, const ArchitectureConfig& arch) {
  auto v = validate(space, arch);
  if (!v.empty()) throw Error("invalid architecture: " + v.front().message);
}

inline ArchitectureConfig uniform_sample(const SearchSpace& space, Rng& rng) {
  ArchitectureConfig arch;
  arch.choice_indices.reserve(space.num_axes());
  for (const auto& axis : space.axes())
    arch.choice_indices.push_back(static_cast<int>(uniform_index(rng, axis.size())));
  return arch;
}

inline ArchitectureConfig smallest_arch(const SearchSpace& space) {
  return ArchitectureConfig{std::vector<int>(space.num_axes(), 0)};
}

inline ArchitectureConfig largest_arch(const SearchSpace& space) {
  ArchitectureConfig arch;
  for (const auto& axis : space.axes()) arch.choice_indices.push_back(static_cast<int>(axis.size()) - 1);
  return arch;
}

/// Chosen values (not indices), in axis order.
inline std::vector<int> encode(const SearchSpace& space, const ArchitectureConfig& arch) {
  require_valid(space, arch);
  std::vector<int> out(space.num_axes());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = space.axes()[i].choices[arch.choice_indices[i]];
  return out;
}

/// Inverse of encode. Throws if a value is not a choice of its axis.
inline ArchitectureConfig decode(const SearchSpace& space, const std::vector<int>& values) {
  if (values.size() != space.num_axes()) throw Error("decode: length mismatch");
  ArchitectureConfig arch;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& ch = space.axes()[i].choices;
    auto it = std::lower_bound(ch.begin(), ch.end(), values[i]);
    if (it == ch.end() || *it != values[i])
      throw Error("decode: value " + std::to_string(values[i]) + " is not a choice of " + space.axes()[i].name);
    arch.choice_indices.push_back(static_cast<int>(it - ch.begin()));
  }
  return arch;
}

inline boost::multiprecision::cpp_int space_cardinality(const SearchSpace& space) {
  boost::multiprecision::cpp_int n = 1;
  for (const auto& axis : space.axes()) n *= axis.size();
  return n;
}

inline NetworkConfig resolve(const SearchSpace& space, const ArchitectureConfig& arch) {
  require_valid(space, arch);
  const auto& L = space.layout();
  NetworkConfig net;
  net.resolution = space.value(arch, L.resolution);
  net.stem_width = space.value(arch, L.stem_width);
  net.stem_kernel = L.stem_kernel;
  net.stem_stride = L.stem_stride;
  net.stages.reserve(L.stages.size());
  for (const auto& st : L.stages)
    net.stages.push_back({space.value(arch, st.width), space.value(arch, st.depth), space.value(arch, st.kernel),
                          space.value(arch, st.expansion), st.stride, st.se});
  net.mbpool_width = space.value(arch, L.mbpool_width);
  net.head_expansion = L.head_expansion;
  net.class_count = space.class_count();
  return net;
}

// ---- JSON ----------------------------------------------------------------

inline nlohmann::json network_to_json(const NetworkConfig& net) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : net.stages)
    stages.push_back({{"width", s.width}, {"depth", s.depth}, {"kernel", s.kernel}, {"expansion", s.expansion}});
  return {{"resolution", net.resolution},
          {"stem_width", net.stem_width},
          {"stages", std::move(stages)},
          {"mbpool_width", net.mbpool_width}};
}

inline nlohmann::json arch_to_json(const SearchSpace& space, const ArchitectureConfig& arch) {
  return network_to_json(resolve(space, arch));
}

/// Parses the architecture JSON object back into choice indices. Fixed
/// attributes must carry their fixed value; coupled axes must agree.
inline ArchitectureConfig arch_from_json(const SearchSpace& space, const nlohmann::json& j) {
  const auto& L = space.layout();
  std::vector<std::optional<int>> values(space.num_axes());
  auto assign = [&](const Slot& slot, int v, const std::string& what) {
    if (!slot.searchable()) {
      if (v != slot.fixed)
        throw Error(what + " is fixed at " + std::to_string(slot.fixed) + ", got " + std::to_string(v));
      return;
    }
    auto& cur = values[slot.axis];
    if (cur && *cur != v) throw Error(what + " conflicts with a coupled attribute");
    cur = v;
  };
  try {
    assign(L.resolution, j.at("resolution").get<int>(), "resolution");
    assign(L.stem_width, j.at("stem_width").get<int>(), "stem_width");
    const auto& stages = j.at("stages");
    if (stages.size() != L.stages.size())
      throw Error("expected " + std::to_string(L.stages.size()) + " stages, got " + std::to_string(stages.size()));
    for (std::size_t s = 0; s < L.stages.size(); ++s) {
      const std::string p = "stages[" + std::to_string(s) + "].";
      assign(L.stages[s].width, stages[s].at("width").get<int>(), p + "width");
      assign(L.stages[s].depth, stages[s].at("depth").get<int>(), p + "depth");
      assign(L.stages[s].kernel, stages[s].at("kernel").get<int>(), p + "kernel");
      assign(L.stages[s].expansion, stages[s].at("expansion").get<int>(), p + "expansion");
    }
    assign(L.mbpool_width, j.at("mbpool_width").get<int>(), "mbpool_width");
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed architecture JSON: ") + e.what());
  }
  std::vector<int> flat;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i]) throw Error("no value for axis " + space.axes()[i].name);
    flat.push_back(*values[i]);
  }
  return decode(space, flat);
}

}  // namespace attsample
