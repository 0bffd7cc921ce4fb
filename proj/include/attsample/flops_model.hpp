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
 * \file flops_model.hpp
 * \brief Multiply-accumulate counting for stem + MBConv stages + MBPool head.
 *
 * One MAC counts as one FLOP. Activations, batch-norm and residual additions
 * are free. Feature maps shrink by ceiling division at stride 2.
 */
#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <string>
#include <vector>

#include "attsample/search_space.hpp"

namespace attsample {

/// Millions of multiply-accumulates.
struct Mflops {
  double value = 0.0;

  friend auto operator<=>(const Mflops&, const Mflops&) = default;
};

inline std::uint64_t conv_flops(long in_ch, long out_ch, long kernel, long h_out, long w_out, long groups = 1) {
  if (in_ch <= 0 || out_ch <= 0 || kernel <= 0 || h_out <= 0 || w_out <= 0 || groups <= 0)
    throw Error("conv_flops: arguments must be positive");
  if (in_ch % groups != 0) throw Error("conv_flops: in_ch not divisible by groups");
  return static_cast<std::uint64_t>(h_out) * static_cast<std::uint64_t>(w_out) *
         static_cast<std::uint64_t>(in_ch / groups) * static_cast<std::uint64_t>(out_ch) *
         static_cast<std::uint64_t>(kernel * kernel);
}

enum class LayerKind { Stem, Expand, Depthwise, SeReduce, SeExpand, Project, HeadExpand, FeatureProj, Classifier };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Stem: return "stem";
    case LayerKind::Expand: return "expand";
    case LayerKind::Depthwise: return "depthwise";
    case LayerKind::SeReduce: return "se_reduce";
    case LayerKind::SeExpand: return "se_expand";
    case LayerKind::Project: return "project";
    case LayerKind::HeadExpand: return "head_expand";
    case LayerKind::FeatureProj: return "feature_proj";
    case LayerKind::Classifier: return "classifier";
  }
  return "?";
}

struct Layer {
  LayerKind kind;
  int stage = -1;  // -1 outside the MBConv stages
  int block = -1;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 1;
  int groups = 1;
  int out_hw = 1;
  std::uint64_t macs = 0;

  std::string name() const {
    if (stage < 0) return to_string(kind);
    return "mb" + std::to_string(stage + 1) + ".b" + std::to_string(block) + "." + to_string(kind);
  }
};

constexpr int spatial_out(int hw, int stride) { return (hw + stride - 1) / stride; }

constexpr int se_channels(int expanded) {
  const int r = (expanded + 2) / 4;  // round(expanded / 4), halves up
  return r < 1 ? 1 : r;
}

struct StageFlops {
  std::uint64_t macs = 0;
  int out_ch = 0;
  int out_hw = 0;
};

namespace detail {

template <class Sink>
void emit(Sink& sink, LayerKind kind, int stage, int block, int in, int out, int k, int groups, int hw) {
  sink(Layer{kind, stage, block, in, out, k, groups, hw, conv_flops(in, out, k, hw, hw, groups)});
}

}  // namespace detail

/// Visits every layer of one MBConv stage. The stride applies to the first
/// block only; the expand conv is skipped at expansion ratio 1.
template <class Sink>
StageFlops visit_mbconv(const StageConfig& stage, int in_ch, int in_hw, int stride, Sink&& sink, int stage_index = 0) {
  if (stage.width <= 0 || stage.depth <= 0 || stage.kernel <= 0 || stage.expansion <= 0 || stride <= 0)
    throw Error("mbconv: invalid stage configuration");
  StageFlops out{0, in_ch, in_hw};
  auto tally = [&](const Layer& l) {
    out.macs += l.macs;
    sink(l);
  };
  int c = in_ch;
  int hw = in_hw;
  for (int b = 0; b < stage.depth; ++b) {
    const int s = b == 0 ? stride : 1;
    const int ex = c * stage.expansion;
    if (stage.expansion != 1) detail::emit(tally, LayerKind::Expand, stage_index, b, c, ex, 1, 1, hw);
    const int ho = spatial_out(hw, s);
    detail::emit(tally, LayerKind::Depthwise, stage_index, b, ex, ex, stage.kernel, ex, ho);
    if (stage.se) {
      const int r = se_channels(ex);
      detail::emit(tally, LayerKind::SeReduce, stage_index, b, ex, r, 1, 1, 1);
      detail::emit(tally, LayerKind::SeExpand, stage_index, b, r, ex, 1, 1, 1);
    }
    detail::emit(tally, LayerKind::Project, stage_index, b, ex, stage.width, 1, 1, ho);
    c = stage.width;
    hw = ho;
  }
  out.out_ch = c;
  out.out_hw = hw;
  return out;
}

inline StageFlops mbconv_flops(const StageConfig& stage, int in_ch, int in_hw, int stride) {
  return visit_mbconv(stage, in_ch, in_hw, stride, [](const Layer&) {});
}

/// Visits every layer of the network in execution order; returns total MACs.
template <class Sink>
std::uint64_t visit_network(const NetworkConfig& net, Sink&& sink) {
  std::uint64_t total = 0;
  auto tally = [&](const Layer& l) {
    total += l.macs;
    sink(l);
  };
  int hw = spatial_out(net.resolution, net.stem_stride);
  detail::emit(tally, LayerKind::Stem, -1, -1, 3, net.stem_width, net.stem_kernel, 1, hw);
  int c = net.stem_width;
  for (std::size_t s = 0; s < net.stages.size(); ++s) {
    auto r = visit_mbconv(net.stages[s], c, hw, net.stages[s].stride, tally, static_cast<int>(s));
    c = r.out_ch;
    hw = r.out_hw;
  }
  const int ex = c * net.head_expansion;
  detail::emit(tally, LayerKind::HeadExpand, -1, -1, c, ex, 1, 1, hw);
  detail::emit(tally, LayerKind::FeatureProj, -1, -1, ex, net.mbpool_width, 1, 1, 1);
  detail::emit(tally, LayerKind::Classifier, -1, -1, net.mbpool_width, net.class_count, 1, 1, 1);
  return total;
}

inline std::uint64_t network_macs(const NetworkConfig& net) {
  return visit_network(net, [](const Layer&) {});
}

inline std::vector<Layer> flops_breakdown(const SearchSpace& space, const ArchitectureConfig& arch) {
  std::vector<Layer> layers;
  visit_network(resolve(space, arch), [&](const Layer& l) { layers.push_back(l); });
  return layers;
}

/// Same count as network_macs(resolve(space, arch)) without building the
/// intermediate config; this sits on the sampler's hot path.
inline Mflops arch_flops(const SearchSpace& space, const ArchitectureConfig& arch) {
  if (!space.has_layout()) throw Error("arch_flops: space has no network layout");
  const auto& L = space.layout();
  if (arch.choice_indices.size() != space.num_axes()) require_valid(space, arch);
  for (std::size_t i = 0; i < space.num_axes(); ++i) {
    const int idx = arch.choice_indices[i];
    if (idx < 0 || static_cast<std::size_t>(idx) >= space.axes()[i].size()) require_valid(space, arch);
  }
  auto none = [](const Layer&) {};
  int hw = spatial_out(space.value(arch, L.resolution), L.stem_stride);
  int c = space.value(arch, L.stem_width);
  std::uint64_t total = conv_flops(3, c, L.stem_kernel, hw, hw);
  for (const auto& st : L.stages) {
    const StageConfig sc{space.value(arch, st.width), space.value(arch, st.depth), space.value(arch, st.kernel),
                         space.value(arch, st.expansion), st.stride, st.se};
    const auto r = visit_mbconv(sc, c, hw, st.stride, none);
    total += r.macs;
    c = r.out_ch;
    hw = r.out_hw;
  }
  const int ex = c * L.head_expansion;
  const int pool = space.value(arch, L.mbpool_width);
  total += conv_flops(c, ex, 1, hw, hw) + conv_flops(ex, pool, 1, 1, 1) + conv_flops(pool, space.class_count(), 1, 1, 1);
  return Mflops{static_cast<double>(total) / 1e6};
}

}  // namespace attsample
