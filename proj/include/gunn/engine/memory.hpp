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

#include "gunn/engine/gunn_layer.hpp"

namespace gunn {

enum class BackpropStrategy {
  gradual,         // saved input + output, one unit's activations recomputed at a time
  simultaneous,    // input + output + every unit's activations
  naive_unrolled,  // every intermediate layer state + every unit's activations
};

/// Activation channels a bottleneck unit keeps per spatial position and sample.
inline std::size_t unit_cache_channels(std::size_t n, std::size_t expansion, std::size_t repeats, ShortcutKind shortcut) {
  const std::size_t h = expansion * n;
  std::size_t total = repeats * (4 * h + n) + (repeats - 1) * n;
  if (shortcut == ShortcutKind::projection) total += n;
  return total;
}

template <typename T>
std::size_t unit_cache_channels(const UpdateUnit<T>& unit) {
  if (unit.kind == UnitKind::linear) return 0;
  return unit_cache_channels(unit.out_channels, unit.expansion, unit.blocks.size(), unit.shortcut);
}

namespace detail {

inline std::size_t account(std::size_t channels, std::size_t segments, std::size_t largest, std::size_t all,
                           BackpropStrategy strategy) {
  switch (strategy) {
    case BackpropStrategy::gradual:
      return 2 * channels + largest;
    case BackpropStrategy::simultaneous:
      return 2 * channels + all;
    case BackpropStrategy::naive_unrolled:
      return (segments + 1) * channels + all;
  }
  return 0;
}

inline std::size_t positions(const Shape& input_shape, std::size_t channels) {
  if (input_shape.size() != 4 || input_shape[1] != channels) {
    throw ShapeError("peak_activation_bytes: input " + to_string(input_shape) + " does not match a " +
                     std::to_string(channels) + "-channel layer");
  }
  return input_shape[0] * input_shape[2] * input_shape[3];
}

}  // namespace detail

/// Accounted peak of persistent activation storage for one forward and backward pass of
/// an evenly partitioned bottleneck layer.
inline std::size_t peak_activation_bytes(const GunnLayerConfig& c, ShortcutKind shortcut, const Shape& input_shape,
                                         BackpropStrategy strategy, std::size_t element_bytes) {
  c.validate();
  const std::size_t per_unit = unit_cache_channels(c.segment_size(), c.K, c.M, shortcut);
  return detail::account(c.N, c.P, per_unit, c.P * per_unit, strategy) * detail::positions(input_shape, c.N) *
         element_bytes;
}

template <typename T>
std::size_t peak_activation_bytes(const GunnLayer<T>& layer, const Shape& input_shape, BackpropStrategy strategy) {
  const std::size_t pos = detail::positions(input_shape, layer.channels());
  std::size_t largest = 0, all = 0;
  for (const auto& u : layer.units) {
    largest = std::max(largest, unit_cache_channels(u));
    all += unit_cache_channels(u);
  }
  return detail::account(layer.channels(), layer.size(), largest, all, strategy) * pos * sizeof(T);
}

}  // namespace gunn
