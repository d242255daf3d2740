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

#include <random>
#include <vector>

#include "gunn/core/rng.hpp"
#include "gunn/core/tensor.hpp"

namespace gunn::train {

/// Per-image mirroring and shift. A shift (dy, dx) in [-pad, pad] selects the crop of the
/// zero-padded image whose top-left corner sits at (pad + dy, pad + dx).
struct AugmentPlan {
  std::vector<bool> flip;
  std::vector<int> dy;
  std::vector<int> dx;
  int pad = 4;

  static AugmentPlan identity(std::size_t batch, int pad = 4) {
    return {std::vector<bool>(batch, false), std::vector<int>(batch, 0), std::vector<int>(batch, 0), pad};
  }
  std::size_t size() const { return flip.size(); }
};

inline AugmentPlan sample_plan(std::size_t batch, Rng& rng, int pad = 4) {
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> shift(-pad, pad);
  AugmentPlan p = AugmentPlan::identity(batch, pad);
  for (std::size_t i = 0; i < batch; ++i) {
    p.flip[i] = coin(rng);
    p.dy[i] = shift(rng);
    p.dx[i] = shift(rng);
  }
  return p;
}

/// out(y, x) = in'(y + dy, x + dx), zero outside, where in' is the (optionally mirrored) image.
template <typename T>
Tensor<T> apply_augment(const Tensor<T>& batch, const AugmentPlan& plan) {
  if (batch.rank() != 4 || plan.size() != batch.batch()) {
    throw ShapeError("augment: plan for " + std::to_string(plan.size()) + " images, batch " + gunn::to_string(batch.shape()));
  }
  Tensor<T> out(batch.shape());
  const long h = long(batch.height()), w = long(batch.width());
  for (std::size_t n = 0; n < batch.batch(); ++n) {
    if (std::abs(plan.dy[n]) > plan.pad || std::abs(plan.dx[n]) > plan.pad) {
      throw ValidationError("augment: shift exceeds padding " + std::to_string(plan.pad));
    }
    for (std::size_t c = 0; c < batch.channels(); ++c) {
      const T* src = batch.raw() + (n * batch.channels() + c) * batch.plane();
      T* dst = out.raw() + (n * batch.channels() + c) * batch.plane();
      for (long y = 0; y < h; ++y) {
        const long sy = y + plan.dy[n];
        if (sy < 0 || sy >= h) continue;
        for (long x = 0; x < w; ++x) {
          const long sx0 = x + plan.dx[n];
          if (sx0 < 0 || sx0 >= w) continue;
          const long sx = plan.flip[n] ? w - 1 - sx0 : sx0;
          dst[y * w + x] = src[sy * w + sx];
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> augment(const Tensor<T>& batch, Rng& rng, int pad = 4) {
  return apply_augment(batch, sample_plan(batch.batch(), rng, pad));
}

}  // namespace gunn::train
