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

#include <cmath>
#include <string>
#include <vector>

#include "gunn/core/tensor.hpp"
#include "gunn/ops/param.hpp"

namespace gunn {

/// How normalization layers pick their statistics.
///   training  - batch statistics, running statistics updated
///   replay    - batch statistics, running statistics left untouched (recomputation, gradient checks)
///   inference - running statistics
enum class Phase { training, replay, inference };

inline bool uses_batch_stats(Phase p) { return p != Phase::inference; }

template <typename T>
struct BatchNormParams {
  Param<T> scale;
  Param<T> shift;
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T epsilon = T(1e-5);

  BatchNormParams() = default;
  explicit BatchNormParams(std::size_t channels)
      : scale(Tensor<T>({channels}, T{1}), ParamRole::bn_scale),
        shift(Tensor<T>({channels}, T{0}), ParamRole::bn_shift),
        running_mean(channels, T{0}),
        running_var(channels, T{1}) {}

  std::size_t channels() const { return scale.size(); }
  std::size_t parameter_count() const { return scale.size() + shift.size(); }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".scale", scale);
    f(prefix + ".shift", shift);
  }
};

template <typename T>
struct BatchNormCache {
  Tensor<T> xhat;
  std::vector<T> inv_std;
  Phase phase = Phase::training;
};

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  Tensor<T> scale;
  Tensor<T> shift;
};

namespace detail {

// Views a [N, C, ...] tensor as N x C x inner.
template <typename T>
void bn_geometry(const Tensor<T>& x, std::size_t channels, std::size_t& outer, std::size_t& inner) {
  if ((x.rank() != 2 && x.rank() != 4) || x.dim(1) != channels) {
    throw ShapeError("batchnorm: input " + to_string(x.shape()) + " does not have " + std::to_string(channels) +
                     " channels");
  }
  outer = x.dim(0);
  inner = x.rank() == 4 ? x.plane() : 1;
}

}  // namespace detail

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& x, BatchNormParams<T>& p, Phase phase,
                            BatchNormCache<T>* cache = nullptr) {
  std::size_t outer = 0, inner = 0;
  const std::size_t channels = p.channels();
  detail::bn_geometry(x, channels, outer, inner);
  const std::size_t count = outer * inner;

  Tensor<T> y(x.shape());
  Tensor<T> xhat(x.shape());
  std::vector<T> inv_std(channels);

  for (std::size_t c = 0; c < channels; ++c) {
    T mean, var;
    if (uses_batch_stats(phase)) {
      T sum{0};
      for (std::size_t n = 0; n < outer; ++n) {
        const T* row = x.raw() + (n * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) sum += row[i];
      }
      mean = sum / static_cast<T>(count);
      T sq{0};
      for (std::size_t n = 0; n < outer; ++n) {
        const T* row = x.raw() + (n * channels + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) {
          const T d = row[i] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<T>(count);
      if (phase == Phase::training) {
        const T unbiased = count > 1 ? var * static_cast<T>(count) / static_cast<T>(count - 1) : var;
        p.running_mean[c] = (T{1} - p.momentum) * p.running_mean[c] + p.momentum * mean;
        p.running_var[c] = (T{1} - p.momentum) * p.running_var[c] + p.momentum * unbiased;
      }
    } else {
      mean = p.running_mean[c];
      var = p.running_var[c];
    }
    const T istd = T{1} / std::sqrt(var + p.epsilon);
    inv_std[c] = istd;
    const T gamma = p.scale.value[c], beta = p.shift.value[c];
    for (std::size_t n = 0; n < outer; ++n) {
      const std::size_t off = (n * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T h = (x[off + i] - mean) * istd;
        xhat[off + i] = h;
        y[off + i] = gamma * h + beta;
      }
    }
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->phase = phase;
  }
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const BatchNormCache<T>& cache, const BatchNormParams<T>& p,
                                     const Tensor<T>& grad_out) {
  Tensor<T>::require_same_shape(cache.xhat, grad_out, "batchnorm_backward");
  std::size_t outer = 0, inner = 0;
  const std::size_t channels = p.channels();
  detail::bn_geometry(grad_out, channels, outer, inner);
  const T count = static_cast<T>(outer * inner);

  BatchNormGrads<T> g{Tensor<T>(grad_out.shape()), Tensor<T>({channels}), Tensor<T>({channels})};
  for (std::size_t c = 0; c < channels; ++c) {
    T sum_dy{0}, sum_dy_xhat{0};
    for (std::size_t n = 0; n < outer; ++n) {
      const std::size_t off = (n * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += grad_out[off + i] * cache.xhat[off + i];
      }
    }
    g.scale[c] = sum_dy_xhat;
    g.shift[c] = sum_dy;
    const T gamma = p.scale.value[c];
    const T istd = cache.inv_std[c];
    for (std::size_t n = 0; n < outer; ++n) {
      const std::size_t off = (n * channels + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        if (uses_batch_stats(cache.phase)) {
          g.input[off + i] =
              gamma * istd / count * (count * grad_out[off + i] - sum_dy - cache.xhat[off + i] * sum_dy_xhat);
        } else {
          g.input[off + i] = gamma * istd * grad_out[off + i];
        }
      }
    }
  }
  return g;
}

template <typename T>
void accumulate(BatchNormParams<T>& p, const BatchNormGrads<T>& g) {
  p.scale.grad += g.scale;
  p.shift.grad += g.shift;
}

}  // namespace gunn
