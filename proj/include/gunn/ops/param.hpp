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
#include <string>
#include <utility>

#include "gunn/core/tensor.hpp"

namespace gunn {

/// What a parameter is; drives weight-decay policy and initialization.
enum class ParamRole { weight, bias, bn_scale, bn_shift };

/// A trainable value with its accumulated gradient.
template <typename T>
struct Param {
  Tensor<T> value;
  Tensor<T> grad;
  ParamRole role = ParamRole::weight;

  Param() = default;
  Param(Tensor<T> v, ParamRole r) : value(std::move(v)), grad(Tensor<T>::zeros_like(value)), role(r) {}

  void zero_grad() { grad.fill(T{0}); }
  bool decays() const noexcept { return role == ParamRole::weight; }
  std::size_t size() const noexcept { return value.size(); }
};

}  // namespace gunn
