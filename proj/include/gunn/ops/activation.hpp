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

#include "gunn/core/tensor.hpp"

namespace gunn {

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.data()) v = v > T{0} ? v : T{0};
}

/// `activation` may be either the ReLU input or its output; both are positive exactly where the gradient passes.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& activation, const Tensor<T>& grad_out) {
  Tensor<T>::require_same_shape(activation, grad_out, "relu_backward");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = activation[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

}  // namespace gunn
