// Copyright 2026 The gunn-cpp Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <tuple>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gunn/core/error.hpp"
#include "gunn/engine/gunn_layer.hpp"
#include "gunn/engine/memory.hpp"

namespace gunn {

enum class PoolKind { none, avg, max };

struct StemSpec {
  std::size_t kernel = 3;
  std::size_t out = 64;
  std::size_t stride = 1;
  std::size_t expand_to = 0;  // 0: no 1x1 expansion
  PoolKind pool = PoolKind::none;

  std::size_t out_channels() const { return expand_to ? expand_to : out; }
  friend bool operator==(const StemSpec&, const StemSpec&) = default;
};

struct GunnStageSpec {
  GunnLayerConfig layer;
  UpdateMode mode = UpdateMode::gradual;
  ShortcutKind shortcut = ShortcutKind::identity;
  friend bool operator==(const GunnStageSpec&, const GunnStageSpec&) = default;
};

/// 1x1 conv + BN + ReLU, optionally followed by 2x2 average pooling.
struct TransitionSpec {
  std::size_t out = 0;
  PoolKind pool = PoolKind::avg;
  friend bool operator==(const TransitionSpec&, const TransitionSpec&) = default;
};

using StageSpec = std::variant<GunnStageSpec, TransitionSpec>;

/// Global average pooling then a fully connected layer with bias.
struct HeadSpec {
  std::size_t features = 0;
  std::size_t classes = 0;
  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct NetworkSpec {
  std::string name;
  std::size_t classes = 10;
  std::size_t input_channels = 3;
  std::size_t input_size = 32;
  bool conv_bias = false;
  StemSpec stem;
  std::vector<StageSpec> stages;
  HeadSpec head;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;

  /// Checks channel chaining, partition divisibility and one GUNN stage per resolution.
  void validate() const {
    auto fail = [&](const std::string& what) { throw ValidationError("network '" + name + "': " + what); };
    if (classes == 0 || input_channels == 0 || input_size == 0) fail("classes, input channels and input size must be positive");
    if (stem.kernel == 0 || stem.out == 0 || stem.stride == 0) fail("stem kernel, width and stride must be positive");
    if (stem.pool == PoolKind::avg) fail("stem pooling must be max or none");
    std::size_t channels = stem.out_channels();
    std::size_t extent = (input_size + 2 * (stem.kernel / 2) - stem.kernel) / stem.stride + 1;
    if (stem.pool == PoolKind::max) extent = (extent + 2 - 3) / 2 + 1;
    std::size_t gunn_here = 0;
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const std::string where = "stage " + std::to_string(i) + ": ";
      if (const auto* g = std::get_if<GunnStageSpec>(&stages[i])) {
        try {
          g->layer.validate();
        } catch (const ValidationError& e) {
          fail(where + e.what());
        }
        if (g->layer.N != channels) {
          fail(where + "gunn layer expects " + std::to_string(g->layer.N) + " channels but receives " +
               std::to_string(channels));
        }
        if (++gunn_here > 1) fail(where + "second gunn stage at the same resolution");
      } else {
        const auto& t = std::get<TransitionSpec>(stages[i]);
        if (t.out == 0) fail(where + "transition width must be positive");
        if (t.pool == PoolKind::max) fail(where + "transitions pool by average or not at all");
        channels = t.out;
        if (t.pool == PoolKind::avg) {
          if (gunn_here != 1) fail(where + "resolution closed without exactly one gunn stage");
          gunn_here = 0;
          if (extent < 2) fail(where + "feature map too small to pool");
          extent /= 2;
        }
      }
    }
    if (gunn_here != 1) fail("final resolution must hold exactly one gunn stage");
    if (head.features != channels) {
      fail("head expects " + std::to_string(head.features) + " features but receives " + std::to_string(channels));
    }
    if (head.classes != classes) fail("head class count differs from network class count");
  }

  /// Spatial extent seen by each stage (before any pooling the stage applies).
  std::vector<std::size_t> stage_extents() const {
    std::size_t extent = (input_size + 2 * (stem.kernel / 2) - stem.kernel) / stem.stride + 1;
    if (stem.pool == PoolKind::max) extent = (extent + 2 - 3) / 2 + 1;
    std::vector<std::size_t> out;
    for (const auto& s : stages) {
      out.push_back(extent);
      if (const auto* t = std::get_if<TransitionSpec>(&s); t && t->pool == PoolKind::avg) extent /= 2;
    }
    return out;
  }

  std::vector<GunnStageSpec> gunn_stages() const {
    std::vector<GunnStageSpec> out;
    for (const auto& s : stages)
      if (const auto* g = std::get_if<GunnStageSpec>(&s)) out.push_back(*g);
    return out;
  }
};

inline std::string to_string(PoolKind p) {
  switch (p) {
    case PoolKind::none:
      return "none";
    case PoolKind::avg:
      return "avg";
    case PoolKind::max:
      return "max";
  }
  return "?";
}

inline std::string to_string(ShortcutKind s) {
  switch (s) {
    case ShortcutKind::identity:
      return "identity";
    case ShortcutKind::projection:
      return "projection";
    case ShortcutKind::none:
      return "none";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Parameter accounting

struct StageCount {
  std::string label;
  std::size_t params = 0;
};

struct ParameterBreakdown {
  std::vector<StageCount> stages;
  std::size_t total = 0;
};

namespace detail {

inline std::size_t conv_bn_params(std::size_t in, std::size_t out, std::size_t k, bool bias) {
  return in * out * k * k + (bias ? out : 0) + 2 * out;
}

inline std::size_t unit_params(std::size_t N, std::size_t n, std::size_t K, std::size_t M, ShortcutKind s, bool bias) {
  std::size_t total = 0;
  const std::size_t h = K * n;
  for (std::size_t m = 0; m < M; ++m) {
    total += conv_bn_params(m == 0 ? N : n, h, 1, bias) + conv_bn_params(h, h, 3, bias) + conv_bn_params(h, n, 1, bias);
  }
  if (s == ShortcutKind::projection) total += conv_bn_params(N, n, 1, bias);
  return total;
}

}  // namespace detail

/// Exact parameter total: conv weights (+ bias when enabled), BN scale and shift after every
/// convolution, and the classifier's weights and bias.
inline ParameterBreakdown parameter_breakdown(const NetworkSpec& spec) {
  spec.validate();
  ParameterBreakdown out;
  const bool b = spec.conv_bias;
  std::size_t stem = detail::conv_bn_params(spec.input_channels, spec.stem.out, spec.stem.kernel, b);
  if (spec.stem.expand_to) stem += detail::conv_bn_params(spec.stem.out, spec.stem.expand_to, 1, b);
  out.stages.push_back({"stem", stem});
  std::size_t channels = spec.stem.out_channels();
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    if (const auto* g = std::get_if<GunnStageSpec>(&spec.stages[i])) {
      const auto& c = g->layer;
      out.stages.push_back({"stage" + std::to_string(i) + ".gunn",
                            c.P * detail::unit_params(c.N, c.segment_size(), c.K, c.M, g->shortcut, b)});
    } else {
      const auto& t = std::get<TransitionSpec>(spec.stages[i]);
      out.stages.push_back({"stage" + std::to_string(i) + ".transition", detail::conv_bn_params(channels, t.out, 1, b)});
      channels = t.out;
    }
  }
  out.stages.push_back({"head", spec.head.features * spec.head.classes + spec.head.classes});
  for (const auto& s : out.stages) out.total += s.params;
  return out;
}

inline std::size_t parameter_count(const NetworkSpec& spec) { return parameter_breakdown(spec).total; }

// ---------------------------------------------------------------------------
// Mode conversion

inline NetworkSpec convert_mode(NetworkSpec spec, UpdateMode mode) {
  for (auto& s : spec.stages)
    if (auto* g = std::get_if<GunnStageSpec>(&s)) g->mode = mode;
  return spec;
}

/// Swaps gradual and simultaneous on every gunn stage.
inline NetworkSpec toggle_mode(NetworkSpec spec) {
  for (auto& s : spec.stages)
    if (auto* g = std::get_if<GunnStageSpec>(&s))
      g->mode = g->mode == UpdateMode::gradual ? UpdateMode::simultaneous : UpdateMode::gradual;
  return spec;
}

// ---------------------------------------------------------------------------
// Presets

namespace detail {

inline NetworkSpec cifar_preset(std::string name, std::size_t classes, std::size_t width1,
                                const std::vector<GunnLayerConfig>& layers, const std::vector<std::size_t>& transitions) {
  NetworkSpec s;
  s.name = std::move(name);
  s.classes = classes;
  s.input_size = 32;
  s.stem = {3, 64, 1, width1, PoolKind::none};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    s.stages.emplace_back(GunnStageSpec{layers[i], UpdateMode::gradual, ShortcutKind::projection});
    s.stages.emplace_back(TransitionSpec{transitions[i], i + 1 < layers.size() ? PoolKind::avg : PoolKind::none});
  }
  s.head = {transitions.back(), classes};
  s.validate();
  return s;
}

inline NetworkSpec imagenet_preset(std::string name, const std::vector<GunnLayerConfig>& layers) {
  NetworkSpec s;
  s.name = std::move(name);
  s.classes = 1000;
  s.input_size = 224;
  s.stem = {7, 64, 2, layers.front().N, PoolKind::max};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    s.stages.emplace_back(GunnStageSpec{layers[i], UpdateMode::gradual, ShortcutKind::identity});
    if (i + 1 < layers.size()) s.stages.emplace_back(TransitionSpec{layers[i + 1].N, PoolKind::avg});
  }
  s.head = {layers.back().N, 1000};
  s.validate();
  return s;
}

inline void require_cifar_classes(std::size_t classes) {
  if (classes != 10 && classes != 100) throw ValidationError("CIFAR presets take 10 or 100 classes, got " + std::to_string(classes));
}

}  // namespace detail

inline NetworkSpec build_gunn15(std::size_t classes = 10) {
  detail::require_cifar_classes(classes);
  return detail::cifar_preset("gunn15", classes, 240, {{240, 20, 2, 1}, {300, 25, 2, 1}, {360, 30, 2, 1}},
                              {300, 360, 360});
}

inline NetworkSpec build_gunn24(std::size_t classes = 10) {
  detail::require_cifar_classes(classes);
  return detail::cifar_preset("gunn24", classes, 720, {{720, 20, 3, 2}, {900, 25, 3, 2}, {1080, 30, 3, 2}},
                              {900, 1080, 1080});
}

inline NetworkSpec build_gunn18() {
  return detail::imagenet_preset("gunn18", {{400, 10, 2, 1}, {800, 20, 2, 1}, {1600, 40, 2, 1}, {2000, 50, 2, 1}});
}

inline NetworkSpec build_wide_gunn18() {
  return detail::imagenet_preset("wide_gunn18",
                                 {{1200, 30, 2, 1}, {1600, 40, 2, 1}, {2000, 50, 2, 1}, {2000, 50, 2, 1}});
}

/// GUNN-15 with plain (non-residual) updates.
inline NetworkSpec build_gunn15_nores(std::size_t classes = 10) {
  auto s = build_gunn15(classes);
  s.name = "gunn15_nores";
  for (auto& st : s.stages)
    if (auto* g = std::get_if<GunnStageSpec>(&st)) g->shortcut = ShortcutKind::none;
  return s;
}

inline std::vector<std::string> preset_names() {
  return {"gunn15", "gunn24", "gunn18", "wide-gunn18", "gunn15-nores"};
}

/// Looks up a preset by name; '_' and '-' are interchangeable.
inline NetworkSpec build_preset(std::string name, std::size_t classes = 10) {
  std::replace(name.begin(), name.end(), '_', '-');
  if (name == "gunn15") return build_gunn15(classes);
  if (name == "gunn24") return build_gunn24(classes);
  if (name == "gunn15-nores") return build_gunn15_nores(classes);
  if (name == "gunn18" || name == "wide-gunn18") {
    if (classes != 1000 && classes != 10) throw ValidationError(name + " is a 1000-class network");
    return name == "gunn18" ? build_gunn18() : build_wide_gunn18();
  }
  throw ValidationError("unknown preset '" + name + "'");
}

// ---------------------------------------------------------------------------
// Scaled-down twins

struct Fraction {
  std::size_t num = 1;
  std::size_t den = 1;

  /// Accepts "a/b" or a decimal such as "0.25".
  static Fraction parse(const std::string& text) {
    try {
      std::size_t pos = 0;
      if (auto slash = text.find('/'); slash != std::string::npos) {
        Fraction f{std::stoul(text.substr(0, slash), &pos), std::stoul(text.substr(slash + 1))};
        if (f.num == 0 || f.den == 0) throw ValidationError("");
        return f;
      }
      const double v = std::stod(text, &pos);
      if (pos != text.size() || !(v > 0) || v > 1) throw ValidationError("");
      const std::size_t den = 10000;
      return reduce({static_cast<std::size_t>(std::llround(v * den)), den});
    } catch (const std::exception&) {
      throw ValidationError("width scale '" + text + "' is not a fraction in (0, 1]");
    }
  }

  static Fraction reduce(Fraction f) {
    std::size_t a = f.num, b = f.den;
    while (b) std::tie(a, b) = std::pair{b, a % b};
    return {f.num / a, f.den / a};
  }

  std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }
};

struct TinyOptions {
  Fraction scale{1, 4};
  std::vector<std::size_t> partitions;  // empty: keep the base network's P values
  std::size_t stem_stride = 1;
  ShortcutKind shortcut = ShortcutKind::projection;
  PoolKind stem_pool = PoolKind::none;

  /// CPU-sized twins: width 1/12, P = (5, 5, 5), stride-2 stem followed by max pooling.
  static TinyOptions desk() { return {{1, 12}, {5, 5, 5}, 2, ShortcutKind::projection, PoolKind::max}; }
};

/// Width-scaled copy of GUNN-15 in gradual and simultaneous form.
inline std::pair<NetworkSpec, NetworkSpec> build_tiny_pair(const TinyOptions& opt, std::size_t classes = 10) {
  auto base = build_gunn15(classes);
  auto scaled = [&](std::size_t v, const std::string& what) {
    if ((v * opt.scale.num) % opt.scale.den != 0) {
      throw ValidationError("width scale " + opt.scale.str() + " turns " + what + "=" + std::to_string(v) +
                            " into a fractional channel count");
    }
    return v * opt.scale.num / opt.scale.den;
  };
  NetworkSpec s = base;
  s.name = opt.shortcut == ShortcutKind::none ? "tiny_gunn15_nores" : "tiny_gunn15";
  s.stem.out = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(double(base.stem.out) * opt.scale.num / opt.scale.den)));
  s.stem.stride = opt.stem_stride;
  s.stem.pool = opt.stem_pool;
  s.stem.expand_to = scaled(base.stem.expand_to, "stem width");
  std::size_t gi = 0;
  const std::size_t n_gunn = base.gunn_stages().size();
  if (!opt.partitions.empty() && opt.partitions.size() != n_gunn) {
    throw ValidationError("partition override lists " + std::to_string(opt.partitions.size()) + " values for " +
                          std::to_string(n_gunn) + " gunn stages");
  }
  for (auto& st : s.stages) {
    if (auto* g = std::get_if<GunnStageSpec>(&st)) {
      g->layer.N = scaled(g->layer.N, "N");
      if (!opt.partitions.empty()) g->layer.P = opt.partitions[gi];
      g->shortcut = opt.shortcut;
      if (g->layer.N % g->layer.P != 0) {
        throw ValidationError("width scale " + opt.scale.str() + " gives N=" + std::to_string(g->layer.N) +
                              ", not divisible by P=" + std::to_string(g->layer.P) + " at gunn stage " +
                              std::to_string(gi));
      }
      ++gi;
    } else {
      auto& t = std::get<TransitionSpec>(st);
      t.out = scaled(t.out, "transition width");
    }
  }
  s.head.features = scaled(base.head.features, "head features");
  s.validate();
  return {s, convert_mode(s, UpdateMode::simultaneous)};
}

// ---------------------------------------------------------------------------
// Memory accounting over whole networks

struct StageMemory {
  std::string label;
  std::size_t gradual = 0;
  std::size_t simultaneous = 0;
  std::size_t naive = 0;
};

/// Per gunn stage activation accounts for a batch at the spec's input resolution.
inline std::vector<StageMemory> memory_plan(const NetworkSpec& spec, std::size_t batch, std::size_t element_bytes) {
  spec.validate();
  std::vector<StageMemory> out;
  const auto extents = spec.stage_extents();
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    const auto* g = std::get_if<GunnStageSpec>(&spec.stages[i]);
    if (!g) continue;
    const Shape shape{batch, g->layer.N, extents[i], extents[i]};
    out.push_back({"stage" + std::to_string(i),
                   peak_activation_bytes(g->layer, g->shortcut, shape, BackpropStrategy::gradual, element_bytes),
                   peak_activation_bytes(g->layer, g->shortcut, shape, BackpropStrategy::simultaneous, element_bytes),
                   peak_activation_bytes(g->layer, g->shortcut, shape, BackpropStrategy::naive_unrolled, element_bytes)});
  }
  return out;
}

}  // namespace gunn
