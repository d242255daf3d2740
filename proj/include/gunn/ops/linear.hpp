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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gunn/core/blas.hpp"
#include "gunn/core/tensor.hpp"
#include "gunn/ops/param.hpp"

namespace gunn {

/// Fully connected layer, weight [out, in], optional bias [out].
template <typename T>
struct LinearParams {
  Param<T> weight;
  std::optional<Param<T>> bias;

  LinearParams() = default;
  LinearParams(std::size_t in, std::size_t out, bool with_bias = true)
      : weight(Tensor<T>({out, in}), ParamRole::weight) {
    if (with_bias) bias.emplace(Tensor<T>({out}), ParamRole::bias);
  }

  std::size_t in_features() const { return weight.value.dim(1); }
  std::size_t out_features() const { return weight.value.dim(0); }
  std::size_t parameter_count() const { return weight.size() + (bias ? bias->size() : 0); }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    if (bias) f(prefix + ".bias", *bias);
  }
};

template <typename T>
struct LinearGrads {
  Tensor<T> input;
  Tensor<T> weight;
  std::optional<Tensor<T>> bias;
};

template <typename T>
Tensor<T> linear_forward(const Tensor<T>& x, const LinearParams<T>& p) {
  if (x.rank() != 2 || x.dim(1) != p.in_features()) {
    throw ShapeError("linear: input " + to_string(x.shape()) + " incompatible with weights " +
                     to_string(p.weight.value.shape()));
  }
  const std::size_t batch = x.dim(0), in = p.in_features(), out = p.out_features();
  Tensor<T> y({batch, out});
  blas::gemm(false, true, batch, out, in, T{1}, x.raw(), in, p.weight.value.raw(), in, T{0}, y.raw(), out);
  if (p.bias) {
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t o = 0; o < out; ++o) y[n * out + o] += p.bias->value[o];
  }
  return y;
}

template <typename T>
LinearGrads<T> linear_backward(const Tensor<T>& x, const LinearParams<T>& p, const Tensor<T>& grad_out) {
  const std::size_t batch = x.dim(0), in = p.in_features(), out = p.out_features();
  if (grad_out.shape() != Shape{batch, out}) {
    throw ShapeError("linear_backward: grad_out " + to_string(grad_out.shape()) + " vs expected " +
                     to_string(Shape{batch, out}));
  }
  LinearGrads<T> g{Tensor<T>(x.shape()), Tensor<T>(p.weight.value.shape()), std::nullopt};
  blas::gemm(false, false, batch, in, out, T{1}, grad_out.raw(), out, p.weight.value.raw(), in, T{0},
             g.input.raw(), in);
  blas::gemm(true, false, out, in, batch, T{1}, grad_out.raw(), out, x.raw(), in, T{0}, g.weight.raw(), in);
  if (p.bias) {
    Tensor<T> gb({out});
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t o = 0; o < out; ++o) gb[o] += grad_out[n * out + o];
    g.bias = std::move(gb);
  }
  return g;
}

template <typename T>
void accumulate(LinearParams<T>& p, const LinearGrads<T>& g) {
  p.weight.grad += g.weight;
  if (p.bias && g.bias) p.bias->grad += *g.bias;
}

template <typename T>
struct LossResult {
  T loss;               // mean over the batch
  Tensor<T> grad;       // d loss / d logits
  std::size_t errors;   // top-1 misclassifications
};

/// Mean softmax cross-entropy over a [batch, classes] logit matrix.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_cross_entropy: logits must be [batch, classes], got " +
                                           to_string(logits.shape()));
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                     std::to_string(batch));
  }
  LossResult<T> r{T{0}, Tensor<T>(logits.shape()), 0};
  const T inv_batch = T{1} / static_cast<T>(batch);
  for (std::size_t n = 0; n < batch; ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
    const T* z = logits.raw() + n * classes;
    std::size_t arg = 0;
    for (std::size_t k = 1; k < classes; ++k)
      if (z[k] > z[arg]) arg = k;
    const T zmax = z[arg];
    T denom{0};
    for (std::size_t k = 0; k < classes; ++k) denom += std::exp(z[k] - zmax);
    const T log_denom = std::log(denom);
    r.loss += (log_denom - (z[label] - zmax)) * inv_batch;
    T* g = r.grad.raw() + n * classes;
    for (std::size_t k = 0; k < classes; ++k) {
      g[k] = std::exp(z[k] - zmax - log_denom) * inv_batch;
    }
    g[label] -= inv_batch;
    if (arg != static_cast<std::size_t>(label)) ++r.errors;
  }
  return r;
}

/// Number of samples whose label is not among the k largest logits.
template <typename T>
std::size_t topk_errors(const Tensor<T>& logits, std::span<const int> labels, std::size_t k) {
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  std::size_t errors = 0;
  for (std::size_t n = 0; n < batch; ++n) {
    const T* z = logits.raw() + n * classes;
    const T target = z[labels[n]];
    std::size_t above = 0;
    for (std::size_t c = 0; c < classes; ++c)
      if (z[c] > target || (z[c] == target && c < static_cast<std::size_t>(labels[n]))) ++above;
    if (above >= k) ++errors;
  }
  return errors;
}

}  // namespace gunn
