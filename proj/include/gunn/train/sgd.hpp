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

#include <map>
#include <string>

#include "gunn/core/tensor.hpp"
#include "gunn/ops/param.hpp"
#include "gunn/train/config.hpp"

namespace gunn::train {

/// Momentum buffers keyed by parameter name.
template <typename T>
struct SgdState {
  std::map<std::string, Tensor<T>> velocity;
};

/// v <- momentum v + g + wd p (wd only on weights); p <- p - lr v.
template <typename T>
void sgd_update(Param<T>& p, Tensor<T>& v, double lr, double momentum, double weight_decay) {
  if (v.shape() != p.value.shape()) v = Tensor<T>::zeros_like(p.value);
  const T mu = static_cast<T>(momentum), rate = static_cast<T>(lr);
  const T wd = p.decays() ? static_cast<T>(weight_decay) : T{0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = mu * v[i] + p.grad[i] + wd * p.value[i];
    p.value[i] -= rate * v[i];
  }
}

/// One step over every parameter of `model` at the learning rate of `epoch`. Gradients are
/// checked first; a non-finite gradient leaves all parameters untouched and throws.
template <typename T, typename Model>
void sgd_step(Model& model, SgdState<T>& state, const TrainConfig& cfg, std::size_t epoch) {
  model.for_each_param("", [&](const std::string& name, Param<T>& p) {
    if (!all_finite(p.grad)) throw NumericalError("non-finite gradient in " + name + " at epoch " + std::to_string(epoch));
  });
  const double lr = cfg.lr_at(epoch);
  model.for_each_param("", [&](const std::string& name, Param<T>& p) {
    sgd_update(p, state.velocity[name], lr, cfg.momentum, cfg.weight_decay);
  });
}

}  // namespace gunn::train
