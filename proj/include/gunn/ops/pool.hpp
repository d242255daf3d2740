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

#include <limits>
#include <vector>

#include "gunn/core/tensor.hpp"

namespace gunn {

/// 2x2 average pooling with stride 2. Odd trailing rows/columns are dropped.
template <typename T>
Tensor<T> avgpool2x2_forward(const Tensor<T>& x) {
  require_rank(x, 4, "avgpool2x2");
  const std::size_t oh = x.height() / 2, ow = x.width() / 2;
  if (oh == 0 || ow == 0) throw ShapeError("avgpool2x2: input " + to_string(x.shape()) + " is smaller than 2x2");
  Tensor<T> y({x.batch(), x.channels(), oh, ow});
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j)
          y.at(n, c, i, j) = (x.at(n, c, 2 * i, 2 * j) + x.at(n, c, 2 * i, 2 * j + 1) + x.at(n, c, 2 * i + 1, 2 * j) +
                              x.at(n, c, 2 * i + 1, 2 * j + 1)) /
                             T{4};
  return y;
}

template <typename T>
Tensor<T> avgpool2x2_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  Tensor<T> g(input_shape);
  for (std::size_t n = 0; n < grad_out.batch(); ++n)
    for (std::size_t c = 0; c < grad_out.channels(); ++c)
      for (std::size_t i = 0; i < grad_out.height(); ++i)
        for (std::size_t j = 0; j < grad_out.width(); ++j) {
          const T v = grad_out.at(n, c, i, j) / T{4};
          g.at(n, c, 2 * i, 2 * j) = v;
          g.at(n, c, 2 * i, 2 * j + 1) = v;
          g.at(n, c, 2 * i + 1, 2 * j) = v;
          g.at(n, c, 2 * i + 1, 2 * j + 1) = v;
        }
  return g;
}

/// Nearest-neighbour 2x upscaling (each value replicated into a 2x2 block).
template <typename T>
Tensor<T> upscale2x(const Tensor<T>& x) {
  require_rank(x, 4, "upscale2x");
  Tensor<T> y({x.batch(), x.channels(), 2 * x.height(), 2 * x.width()});
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t i = 0; i < y.height(); ++i)
        for (std::size_t j = 0; j < y.width(); ++j) y.at(n, c, i, j) = x.at(n, c, i / 2, j / 2);
  return y;
}

struct MaxPoolGeometry {
  std::size_t kernel = 3;
  std::size_t stride = 2;
  std::size_t padding = 1;
};

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::size_t> argmax;  // flat input index per output element
};

template <typename T>
MaxPoolResult<T> maxpool_forward(const Tensor<T>& x, MaxPoolGeometry g = {}) {
  require_rank(x, 4, "maxpool");
  if (x.height() + 2 * g.padding < g.kernel || x.width() + 2 * g.padding < g.kernel) {
    throw ShapeError("maxpool: input " + to_string(x.shape()) + " smaller than the pooling window");
  }
  const std::size_t oh = (x.height() + 2 * g.padding - g.kernel) / g.stride + 1;
  const std::size_t ow = (x.width() + 2 * g.padding - g.kernel) / g.stride + 1;
  MaxPoolResult<T> r{Tensor<T>({x.batch(), x.channels(), oh, ow}), {}};
  r.argmax.resize(r.output.size());
  std::size_t k = 0;
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j, ++k) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = 0;
          for (std::size_t di = 0; di < g.kernel; ++di) {
            const long y = static_cast<long>(i * g.stride + di) - static_cast<long>(g.padding);
            if (y < 0 || y >= static_cast<long>(x.height())) continue;
            for (std::size_t dj = 0; dj < g.kernel; ++dj) {
              const long xx = static_cast<long>(j * g.stride + dj) - static_cast<long>(g.padding);
              if (xx < 0 || xx >= static_cast<long>(x.width())) continue;
              const std::size_t idx = ((n * x.channels() + c) * x.height() + static_cast<std::size_t>(y)) * x.width() +
                                      static_cast<std::size_t>(xx);
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          r.output[k] = best;
          r.argmax[k] = best_idx;
        }
  return r;
}

template <typename T>
Tensor<T> maxpool_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                           const Tensor<T>& grad_out) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool_backward: argmax/grad size mismatch");
  Tensor<T> g(input_shape);
  for (std::size_t k = 0; k < grad_out.size(); ++k) g[argmax[k]] += grad_out[k];
  return g;
}

/// [N, C, H, W] -> [N, C] spatial mean.
template <typename T>
Tensor<T> global_avgpool_forward(const Tensor<T>& x) {
  require_rank(x, 4, "global_avgpool");
  Tensor<T> y({x.batch(), x.channels()});
  const T inv = T{1} / static_cast<T>(x.plane());
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t c = 0; c < x.channels(); ++c) {
      T acc{0};
      for (T v : x.channel(n, c)) acc += v;
      y[n * x.channels() + c] = acc * inv;
    }
  return y;
}

template <typename T>
Tensor<T> global_avgpool_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  Tensor<T> g(input_shape);
  const T inv = T{1} / static_cast<T>(g.plane());
  for (std::size_t n = 0; n < g.batch(); ++n)
    for (std::size_t c = 0; c < g.channels(); ++c) {
      const T v = grad_out[n * g.channels() + c] * inv;
      for (auto& e : g.channel(n, c)) e = v;
    }
  return g;
}

}  // namespace gunn
