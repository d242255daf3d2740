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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gunn/core/tensor.hpp"
#include "gunn/ops/activation.hpp"
#include "gunn/ops/batchnorm.hpp"
#include "gunn/ops/conv.hpp"

namespace gunn {

enum class UnitKind { bottleneck, linear };

/// How the unit's output is combined with the segment it replaces.
///   identity   - F_c(x) = G_c(x) + x_c
///   projection - F_c(x) = G_c(x) + BN(W_p x), a learned 1x1 map from all input channels
///   none       - F_c(x) = G_c(x)
enum class ShortcutKind { identity, projection, none };

/// 1x1 (n_in -> K n) / BN / ReLU / 3x3 (K n -> K n) / BN / ReLU / 1x1 (K n -> n) / BN.
template <typename T>
struct Bottleneck {
  ConvParams<T> conv1, conv2, conv3;
  BatchNormParams<T> bn1, bn2, bn3;

  Bottleneck() = default;
  Bottleneck(std::size_t n_in, std::size_t n_out, std::size_t expansion, bool conv_bias)
      : conv1(expansion * n_out, n_in, 1, 1, 0, conv_bias),
        conv2(expansion * n_out, expansion * n_out, 3, 1, 1, conv_bias),
        conv3(n_out, expansion * n_out, 1, 1, 0, conv_bias),
        bn1(expansion * n_out),
        bn2(expansion * n_out),
        bn3(n_out) {}

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    conv1.for_each_param(prefix + ".conv1", f);
    bn1.for_each_param(prefix + ".bn1", f);
    conv2.for_each_param(prefix + ".conv2", f);
    bn2.for_each_param(prefix + ".bn2", f);
    conv3.for_each_param(prefix + ".conv3", f);
    bn3.for_each_param(prefix + ".bn3", f);
  }

  template <typename F>
  void for_each_batchnorm(const std::string& prefix, F&& f) {
    f(prefix + ".bn1", bn1);
    f(prefix + ".bn2", bn2);
    f(prefix + ".bn3", bn3);
  }
};

template <typename T>
struct Projection {
  ConvParams<T> conv;
  BatchNormParams<T> bn;
};

/// Computes the new values of one channel segment from the full current state.
/// A stack of M bottlenecks: the first reads all n_in channels, later ones read only
/// the segment's n_out channels, each adding its own residual.
template <typename T>
struct UpdateUnit {
  UnitKind kind = UnitKind::bottleneck;
  ShortcutKind shortcut = ShortcutKind::identity;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t expansion = 1;
  std::vector<Bottleneck<T>> blocks;
  std::optional<ConvParams<T>> linear_map;
  std::optional<Projection<T>> projection;

  static UpdateUnit make_bottleneck(std::size_t n_in, std::size_t n_out, std::size_t expansion, std::size_t repeats,
                                    ShortcutKind shortcut, bool conv_bias = false) {
    if (n_in == 0 || n_out == 0 || expansion == 0 || repeats == 0) {
      throw ValidationError("update unit: channel counts, expansion and repeat count must be positive");
    }
    UpdateUnit u;
    u.kind = UnitKind::bottleneck;
    u.shortcut = shortcut;
    u.in_channels = n_in;
    u.out_channels = n_out;
    u.expansion = expansion;
    for (std::size_t m = 0; m < repeats; ++m) u.blocks.emplace_back(m == 0 ? n_in : n_out, n_out, expansion, conv_bias);
    if (shortcut == ShortcutKind::projection) {
      u.projection.emplace(Projection<T>{ConvParams<T>(n_out, n_in, 1, 1, 0, conv_bias), BatchNormParams<T>(n_out)});
    }
    return u;
  }

  /// A single 1x1 convolution without normalization or activation.
  static UpdateUnit make_linear(std::size_t n_in, std::size_t n_out, ShortcutKind shortcut, bool bias = false) {
    if (shortcut == ShortcutKind::projection) throw ValidationError("linear units support identity or no shortcut");
    UpdateUnit u;
    u.kind = UnitKind::linear;
    u.shortcut = shortcut;
    u.in_channels = n_in;
    u.out_channels = n_out;
    u.linear_map.emplace(n_out, n_in, 1, 1, 0, bias);
    return u;
  }

  std::size_t repeats() const { return kind == UnitKind::linear ? 1 : blocks.size(); }

  /// Whether the backward pass may use the merged residual accumulation (identity shortcut
  /// straight onto the segment, nothing stacked on top).
  bool merges_residual() const { return shortcut == ShortcutKind::identity && repeats() == 1; }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    if (linear_map) linear_map->for_each_param(prefix + ".linear", f);
    for (std::size_t m = 0; m < blocks.size(); ++m) blocks[m].for_each_param(prefix + ".block" + std::to_string(m), f);
    if (projection) {
      projection->conv.for_each_param(prefix + ".proj", f);
      projection->bn.for_each_param(prefix + ".proj_bn", f);
    }
  }

  template <typename F>
  void for_each_batchnorm(const std::string& prefix, F&& f) {
    for (std::size_t m = 0; m < blocks.size(); ++m) blocks[m].for_each_batchnorm(prefix + ".block" + std::to_string(m), f);
    if (projection) f(prefix + ".proj_bn", projection->bn);
  }

  std::size_t parameter_count() {
    std::size_t total = 0;
    for_each_param("", [&](const std::string&, Param<T>& p) { total += p.size(); });
    return total;
  }
};

template <typename T>
struct BlockCache {
  Tensor<T> input;  // stacked blocks only; the first block reads the layer state
  BatchNormCache<T> bn1, bn2, bn3;
  Tensor<T> r1, r2;
};

/// Everything a unit keeps between its forward and backward pass.
template <typename T>
struct UnitCache {
  std::vector<BlockCache<T>> blocks;
  BatchNormCache<T> proj_bn;

  std::size_t activation_elements() const {
    std::size_t total = proj_bn.xhat.size();
    for (const auto& b : blocks)
      total += b.input.size() + b.bn1.xhat.size() + b.bn2.xhat.size() + b.bn3.xhat.size() + b.r1.size() + b.r2.size();
    return total;
  }
};

/// Gradient of a unit's output with respect to the state it read.
///   branch - through the convolutional path (and projection), over all input channels
///   skip   - through the identity shortcut, over the segment channels only
template <typename T>
struct UnitBackward {
  Tensor<T> branch;
  std::optional<Tensor<T>> skip;
};

namespace detail {

template <typename T>
void require_unit_fit(const Tensor<T>& state, const UpdateUnit<T>& unit, std::span<const std::size_t> segment) {
  if (state.rank() != 4 || state.channels() != unit.in_channels) {
    throw ShapeError("update unit: state " + to_string(state.shape()) + " does not have " +
                     std::to_string(unit.in_channels) + " channels");
  }
  if (segment.size() != unit.out_channels) {
    throw ShapeError("update unit: segment of " + std::to_string(segment.size()) + " channels for a unit producing " +
                     std::to_string(unit.out_channels));
  }
}

template <typename T>
Tensor<T> block_forward(const Tensor<T>& z, Bottleneck<T>& b, Phase phase, BlockCache<T>* cache) {
  BatchNormCache<T> c1, c2, c3;
  Tensor<T> r1 = batchnorm_forward(conv2d_forward(z, b.conv1), b.bn1, phase, &c1);
  relu_inplace(r1);
  Tensor<T> r2 = batchnorm_forward(conv2d_forward(r1, b.conv2), b.bn2, phase, &c2);
  relu_inplace(r2);
  Tensor<T> g = batchnorm_forward(conv2d_forward(r2, b.conv3), b.bn3, phase, &c3);
  if (cache) {
    cache->bn1 = std::move(c1);
    cache->bn2 = std::move(c2);
    cache->bn3 = std::move(c3);
    cache->r1 = std::move(r1);
    cache->r2 = std::move(r2);
  }
  return g;
}

template <typename T>
Tensor<T> block_backward(const Tensor<T>& z, Bottleneck<T>& b, const BlockCache<T>& cache, const Tensor<T>& grad) {
  auto g3 = batchnorm_backward(cache.bn3, b.bn3, grad);
  accumulate(b.bn3, g3);
  auto c3 = conv2d_backward(cache.r2, b.conv3, g3.input);
  accumulate(b.conv3, c3);
  auto g2 = batchnorm_backward(cache.bn2, b.bn2, relu_backward(cache.r2, c3.input));
  accumulate(b.bn2, g2);
  auto c2 = conv2d_backward(cache.r1, b.conv2, g2.input);
  accumulate(b.conv2, c2);
  auto g1 = batchnorm_backward(cache.bn1, b.bn1, relu_backward(cache.r1, c2.input));
  accumulate(b.bn1, g1);
  auto c1 = conv2d_backward(z, b.conv1, g1.input);
  accumulate(b.conv1, c1);
  return std::move(c1.input);
}

}  // namespace detail

/// New values F_c(state) for the unit's segment ([batch, n_out, H, W]).
template <typename T>
Tensor<T> unit_apply(const Tensor<T>& state, UpdateUnit<T>& unit, std::span<const std::size_t> segment, Phase phase,
                     UnitCache<T>* cache = nullptr) {
  detail::require_unit_fit(state, unit, segment);
  if (cache) {
    cache->blocks.assign(unit.blocks.size(), BlockCache<T>{});
    cache->proj_bn = {};
  }

  Tensor<T> z;
  if (unit.kind == UnitKind::linear) {
    z = conv2d_forward(state, *unit.linear_map);
  } else {
    z = detail::block_forward(state, unit.blocks[0], phase, cache ? &cache->blocks[0] : nullptr);
  }
  switch (unit.shortcut) {
    case ShortcutKind::identity:
      z += gather_channels(state, segment);
      break;
    case ShortcutKind::projection: {
      BatchNormCache<T> pc;
      z += batchnorm_forward(conv2d_forward(state, unit.projection->conv), unit.projection->bn, phase, &pc);
      if (cache) cache->proj_bn = std::move(pc);
      break;
    }
    case ShortcutKind::none:
      break;
  }
  for (std::size_t m = 1; m < unit.blocks.size(); ++m) {
    BlockCache<T>* bc = cache ? &cache->blocks[m] : nullptr;
    Tensor<T> g = detail::block_forward(z, unit.blocks[m], phase, bc);
    if (bc) bc->input = z;
    if (unit.shortcut == ShortcutKind::none) {
      z = std::move(g);
    } else {
      z += g;
    }
  }
  return z;
}

/// Residual delta F_c(state) - state_c; the caller adds it onto the segment channels.
template <typename T>
Tensor<T> update_unit_forward(const Tensor<T>& state, UpdateUnit<T>& unit, std::span<const std::size_t> segment,
                              Phase phase = Phase::inference) {
  Tensor<T> f = unit_apply(state, unit, segment, phase);
  f -= gather_channels(state, segment);
  return f;
}

/// Adjoint of unit_apply. Parameter gradients accumulate into the unit.
template <typename T>
UnitBackward<T> unit_backward(const Tensor<T>& state, UpdateUnit<T>& unit, std::span<const std::size_t> segment,
                              const UnitCache<T>& cache, const Tensor<T>& grad_new) {
  detail::require_unit_fit(state, unit, segment);
  const Shape seg_shape{state.batch(), segment.size(), state.height(), state.width()};
  if (grad_new.shape() != seg_shape) {
    throw ShapeError("unit_backward: gradient " + to_string(grad_new.shape()) + " vs segment output " +
                     to_string(seg_shape));
  }
  Tensor<T> g = grad_new;
  for (std::size_t m = unit.blocks.size(); m-- > 1;) {
    const auto& bc = cache.blocks[m];
    Tensor<T> dz = detail::block_backward(bc.input, unit.blocks[m], bc, g);
    if (unit.shortcut != ShortcutKind::none) dz += g;
    g = std::move(dz);
  }

  UnitBackward<T> out;
  if (unit.kind == UnitKind::linear) {
    auto cg = conv2d_backward(state, *unit.linear_map, g);
    accumulate(*unit.linear_map, cg);
    out.branch = std::move(cg.input);
  } else {
    out.branch = detail::block_backward(state, unit.blocks[0], cache.blocks[0], g);
  }
  if (unit.shortcut == ShortcutKind::projection) {
    auto bg = batchnorm_backward(cache.proj_bn, unit.projection->bn, g);
    accumulate(unit.projection->bn, bg);
    auto cg = conv2d_backward(state, unit.projection->conv, bg.input);
    accumulate(unit.projection->conv, cg);
    out.branch += cg.input;
  } else if (unit.shortcut == ShortcutKind::identity) {
    out.skip = std::move(g);
  }
  return out;
}

}  // namespace gunn
