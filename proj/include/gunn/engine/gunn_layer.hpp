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

#include <string>
#include <vector>

#include "gunn/engine/partition.hpp"
#include "gunn/engine/update_unit.hpp"

namespace gunn {

enum class UpdateMode { gradual, simultaneous };

inline std::string to_string(UpdateMode m) { return m == UpdateMode::gradual ? "gunn" : "sunn"; }

/// {N, P, K, M}: channels, equal segments, bottleneck expansion, stacked blocks per unit.
struct GunnLayerConfig {
  std::size_t N = 0;
  std::size_t P = 1;
  std::size_t K = 1;
  std::size_t M = 1;

  std::size_t segment_size() const { return P ? N / P : 0; }

  void validate() const {
    if (N == 0 || P == 0 || K == 0 || M == 0) {
      throw ValidationError("gunn layer {N=" + std::to_string(N) + ", P=" + std::to_string(P) + ", K=" +
                            std::to_string(K) + ", M=" + std::to_string(M) + "}: all values must be positive");
    }
    if (N % P != 0) {
      throw ValidationError("gunn layer: N=" + std::to_string(N) + " is not divisible by P=" + std::to_string(P));
    }
  }

  friend bool operator==(const GunnLayerConfig&, const GunnLayerConfig&) = default;
};

/// N channels split into P equal segments, one update unit per segment.
template <typename T>
struct GunnLayer {
  ChannelPartition partition;
  std::vector<UpdateUnit<T>> units;
  UpdateMode mode = UpdateMode::gradual;

  std::size_t channels() const { return partition.channels(); }
  std::size_t size() const { return units.size(); }

  /// Geometry of an evenly partitioned bottleneck layer.
  GunnLayerConfig config() const {
    if (units.empty()) return {};
    return {channels(), size(), units.front().expansion, units.front().repeats()};
  }

  void validate() const {
    if (units.size() != partition.size()) {
      throw ValidationError("gunn layer: " + std::to_string(units.size()) + " units for " +
                            std::to_string(partition.size()) + " segments");
    }
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (units[i].in_channels != channels() || units[i].out_channels != partition.segment(i).size()) {
        throw ValidationError("gunn layer: unit " + std::to_string(i) + " does not fit segment " + std::to_string(i));
      }
    }
  }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < units.size(); ++i) units[i].for_each_param(prefix + ".unit" + std::to_string(i), f);
  }

  template <typename F>
  void for_each_batchnorm(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < units.size(); ++i) units[i].for_each_batchnorm(prefix + ".unit" + std::to_string(i), f);
  }

  std::size_t parameter_count() {
    std::size_t total = 0;
    for (auto& u : units) total += u.parameter_count();
    return total;
  }
};

template <typename T>
GunnLayer<T> make_gunn_layer(std::size_t channels, std::size_t parts, std::size_t expansion, std::size_t repeats,
                             ShortcutKind shortcut = ShortcutKind::identity, UpdateMode mode = UpdateMode::gradual,
                             bool conv_bias = false) {
  GunnLayerConfig{channels, parts, expansion, repeats}.validate();
  GunnLayer<T> layer{ChannelPartition::even(channels, parts), {}, mode};
  const std::size_t n = channels / parts;
  for (std::size_t i = 0; i < parts; ++i) {
    layer.units.push_back(UpdateUnit<T>::make_bottleneck(channels, n, expansion, repeats, shortcut, conv_bias));
  }
  return layer;
}

template <typename T>
GunnLayer<T> make_gunn_layer(const GunnLayerConfig& c, ShortcutKind shortcut = ShortcutKind::identity,
                             UpdateMode mode = UpdateMode::gradual, bool conv_bias = false) {
  return make_gunn_layer<T>(c.N, c.P, c.K, c.M, shortcut, mode, conv_bias);
}

/// Layer made of linear units (1x1 convolutions, no normalization).
template <typename T>
GunnLayer<T> make_linear_gunn_layer(std::size_t channels, std::size_t parts, ShortcutKind shortcut,
                                    UpdateMode mode = UpdateMode::gradual) {
  GunnLayer<T> layer{ChannelPartition::even(channels, parts), {}, mode};
  for (std::size_t i = 0; i < parts; ++i) {
    layer.units.push_back(UpdateUnit<T>::make_linear(channels, channels / parts, shortcut));
  }
  return layer;
}

/// What a forward pass leaves behind for the backward pass.
/// Gradual mode keeps the input and the output only; unit activations are recomputed.
/// Simultaneous mode keeps every unit's activations.
template <typename T>
struct StageTape {
  UpdateMode mode = UpdateMode::gradual;
  Phase phase = Phase::training;
  std::size_t units = 0;
  Tensor<T> saved_input;
  Tensor<T> output;
  std::vector<UnitCache<T>> caches;

  bool valid() const { return !saved_input.empty(); }

  std::size_t activation_elements() const {
    std::size_t total = saved_input.size() + output.size();
    for (const auto& c : caches) total += c.activation_elements();
    return total;
  }
};

/// Per-call statistics of a backward pass, for memory accounting checks.
struct BackwardStats {
  std::size_t peak_transient_elements = 0;
};

template <typename T>
struct LayerBackward {
  Tensor<T> grad_input;
  BackwardStats stats;
};

namespace detail {

template <typename T>
void require_layer_input(const Tensor<T>& x, const GunnLayer<T>& layer) {
  layer.validate();
  if (x.rank() != 4 || x.channels() != layer.channels()) {
    throw ShapeError("gunn layer with " + std::to_string(layer.channels()) + " channels got input " +
                     to_string(x.shape()));
  }
}

inline Phase recompute_phase(Phase forward) { return forward == Phase::inference ? Phase::inference : Phase::replay; }

template <typename T>
void copy_channels(Tensor<T>& dst, const Tensor<T>& src, std::span<const std::size_t> channels) {
  for (std::size_t n = 0; n < dst.batch(); ++n) {
    for (auto c : channels) {
      auto s = src.channel(n, c);
      std::copy(s.begin(), s.end(), dst.channel(n, c).begin());
    }
  }
}

}  // namespace detail

/// Evaluates the layer. Gradual mode updates one segment at a time in place, so unit i
/// reads segments < i already updated; simultaneous mode feeds every unit the original x.
template <typename T>
Tensor<T> gunn_forward(const Tensor<T>& x, GunnLayer<T>& layer, Phase phase = Phase::inference,
                       StageTape<T>* tape = nullptr) {
  detail::require_layer_input(x, layer);
  const bool keep = tape != nullptr;
  Tensor<T> y = x;
  std::vector<UnitCache<T>> caches;
  if (layer.mode == UpdateMode::gradual) {
    for (std::size_t i = 0; i < layer.size(); ++i) {
      auto seg = layer.partition.segment(i);
      scatter_channels(y, seg, unit_apply(y, layer.units[i], seg, phase));
    }
  } else {
    if (keep) caches.resize(layer.size());
    for (std::size_t i = 0; i < layer.size(); ++i) {
      auto seg = layer.partition.segment(i);
      scatter_channels(y, seg, unit_apply(x, layer.units[i], seg, phase, keep ? &caches[i] : nullptr));
    }
  }
  if (tape) {
    tape->mode = layer.mode;
    tape->phase = phase;
    tape->units = layer.size();
    tape->saved_input = x;
    tape->output = y;
    tape->caches = std::move(caches);
  }
  return y;
}

namespace detail {

template <typename T>
void require_tape(const StageTape<T>& tape, const GunnLayer<T>& layer, const Tensor<T>& grad_out, UpdateMode mode) {
  layer.validate();
  if (!tape.valid() || tape.mode != mode) {
    throw ValidationError(std::string("tape was not recorded by a ") + (mode == UpdateMode::gradual ? "gradual" : "simultaneous") +
                          "-mode forward");
  }
  if (tape.units != layer.size() || tape.saved_input.channels() != layer.channels()) {
    throw ValidationError("tape does not belong to this layer");
  }
  if (mode == UpdateMode::simultaneous && tape.caches.size() != layer.size()) {
    throw ValidationError("simultaneous tape has no unit activations");
  }
  Tensor<T>::require_same_shape(tape.saved_input, grad_out, "gunn backward gradient");
}

}  // namespace detail

/// Memory-efficient adjoint of the gradual forward. Walks the segments backwards, restores
/// each segment from the saved input, recomputes that unit's activations and propagates.
/// Consumes the tape: its output buffer is reverted to the input along the way.
/// Parameter gradients accumulate into the layer.
template <typename T>
LayerBackward<T> gunn_backward(StageTape<T>& tape, GunnLayer<T>& layer, const Tensor<T>& grad_out) {
  detail::require_tape(tape, layer, grad_out, UpdateMode::gradual);
  Tensor<T>& state = tape.output;
  Tensor<T> grad = grad_out;
  const Phase phase = detail::recompute_phase(tape.phase);
  BackwardStats stats;
  for (std::size_t i = layer.size(); i-- > 0;) {
    auto seg = layer.partition.segment(i);
    detail::copy_channels(state, tape.saved_input, seg);
    UnitCache<T> cache;
    unit_apply(state, layer.units[i], seg, phase, &cache);
    stats.peak_transient_elements = std::max(stats.peak_transient_elements, cache.activation_elements());
    auto bw = unit_backward(state, layer.units[i], seg, cache, gather_channels(grad, seg));
    if (layer.units[i].merges_residual()) {
      grad += bw.branch;
    } else {
      Tensor<T> own = gather_channels(bw.branch, seg);
      if (bw.skip) own += *bw.skip;
      scatter_channels(bw.branch, seg, Tensor<T>(own.shape()));
      grad += bw.branch;
      scatter_channels(grad, seg, own);
    }
  }
  tape.saved_input = Tensor<T>();
  tape.output = Tensor<T>();
  return {std::move(grad), stats};
}

/// Standard adjoint of the simultaneous forward, using the activations on the tape.
template <typename T>
LayerBackward<T> sunn_backward(StageTape<T>& tape, GunnLayer<T>& layer, const Tensor<T>& grad_out) {
  detail::require_tape(tape, layer, grad_out, UpdateMode::simultaneous);
  Tensor<T> grad_in(tape.saved_input.shape());
  for (std::size_t i = 0; i < layer.size(); ++i) {
    auto seg = layer.partition.segment(i);
    auto bw = unit_backward(tape.saved_input, layer.units[i], seg, tape.caches[i], gather_channels(grad_out, seg));
    grad_in += bw.branch;
    if (bw.skip) add_channels(grad_in, seg, *bw.skip);
  }
  tape.saved_input = Tensor<T>();
  tape.output = Tensor<T>();
  tape.caches.clear();
  return {std::move(grad_in), {}};
}

/// Simultaneous adjoint from the input alone; unit activations are recomputed with batch
/// statistics and running statistics are left untouched.
template <typename T>
LayerBackward<T> sunn_backward(const Tensor<T>& x, GunnLayer<T>& layer, const Tensor<T>& grad_out,
                               Phase forward_phase = Phase::replay) {
  const UpdateMode saved = layer.mode;
  layer.mode = UpdateMode::simultaneous;
  StageTape<T> tape;
  try {
    gunn_forward(x, layer, detail::recompute_phase(forward_phase), &tape);
  } catch (...) {
    layer.mode = saved;
    throw;
  }
  layer.mode = saved;
  return sunn_backward(tape, layer, grad_out);
}

/// Dispatches on the tape's mode.
template <typename T>
LayerBackward<T> layer_backward(StageTape<T>& tape, GunnLayer<T>& layer, const Tensor<T>& grad_out) {
  return tape.mode == UpdateMode::gradual ? gunn_backward(tape, layer, grad_out) : sunn_backward(tape, layer, grad_out);
}

}  // namespace gunn
