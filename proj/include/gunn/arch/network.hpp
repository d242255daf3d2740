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
#include <variant>
#include <vector>

#include "gunn/arch/spec.hpp"
#include "gunn/core/rng.hpp"
#include "gunn/engine/gunn_layer.hpp"
#include "gunn/ops/linear.hpp"
#include "gunn/ops/pool.hpp"

namespace gunn {

/// conv -> BN -> ReLU, keeping what its backward pass needs.
template <typename T>
struct ConvBnRelu {
  ConvParams<T> conv;
  BatchNormParams<T> bn;
  Tensor<T> input;
  BatchNormCache<T> bn_cache;
  Tensor<T> output;

  ConvBnRelu() = default;
  ConvBnRelu(std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride, bool bias)
      : conv(out, in, kernel, stride, kernel / 2, bias), bn(out) {}

  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record) {
    BatchNormCache<T> c;
    Tensor<T> y = batchnorm_forward(conv2d_forward(x, conv), bn, phase, record ? &c : nullptr);
    relu_inplace(y);
    if (record) {
      input = x;
      bn_cache = std::move(c);
      output = y;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& grad) {
    auto gb = batchnorm_backward(bn_cache, bn, relu_backward(output, grad));
    accumulate(bn, gb);
    auto gc = conv2d_backward(input, conv, gb.input);
    accumulate(conv, gc);
    release();
    return std::move(gc.input);
  }

  void release() {
    input = {};
    output = {};
    bn_cache = {};
  }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    conv.for_each_param(prefix + ".conv", f);
    bn.for_each_param(prefix + ".bn", f);
  }
};

template <typename T>
struct GunnBlock {
  GunnLayer<T> layer;
  StageTape<T> tape;
};

template <typename T>
struct TransitionBlock {
  ConvBnRelu<T> conv;
  bool pool = false;
  Shape pre_pool;
};

/// A runnable network built from a NetworkSpec.
template <typename T>
class Network {
 public:
  explicit Network(NetworkSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    const bool b = spec_.conv_bias;
    stem_ = ConvBnRelu<T>(spec_.input_channels, spec_.stem.out, spec_.stem.kernel, spec_.stem.stride, b);
    if (spec_.stem.expand_to) expand_.emplace_back(spec_.stem.out, spec_.stem.expand_to, 1, 1, b);
    std::size_t channels = spec_.stem.out_channels();
    for (const auto& st : spec_.stages) {
      if (const auto* g = std::get_if<GunnStageSpec>(&st)) {
        blocks_.emplace_back(GunnBlock<T>{make_gunn_layer<T>(g->layer, g->shortcut, g->mode, b), {}});
      } else {
        const auto& t = std::get<TransitionSpec>(st);
        blocks_.emplace_back(TransitionBlock<T>{ConvBnRelu<T>(channels, t.out, 1, 1, b), t.pool == PoolKind::avg, {}});
        channels = t.out;
      }
    }
    head_ = LinearParams<T>(spec_.head.features, spec_.head.classes, true);
  }

  const NetworkSpec& spec() const { return spec_; }

  /// He-normal weights (std sqrt(2/n), n = k*k*out_channels for convolutions and the input
  /// width for the classifier); BN scale 1, shift 0; biases 0.
  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    for_each_param("", [&](const std::string&, Param<T>& p) {
      switch (p.role) {
        case ParamRole::weight: {
          const auto& s = p.value.shape();
          const double fan = s.size() == 4 ? double(s[0] * s[2] * s[3]) : double(s[1]);
          fill_normal(p.value, rng, 0.0, std::sqrt(2.0 / fan));
          break;
        }
        case ParamRole::bn_scale:
          p.value.fill(T{1});
          break;
        default:
          p.value.fill(T{0});
      }
      p.zero_grad();
    });
    for_each_batchnorm("", [](const std::string&, BatchNormParams<T>& bn) {
      std::fill(bn.running_mean.begin(), bn.running_mean.end(), T{0});
      std::fill(bn.running_var.begin(), bn.running_var.end(), T{1});
    });
  }

  void set_mode(UpdateMode mode) {
    spec_ = convert_mode(spec_, mode);
    for (auto& b : blocks_)
      if (auto* g = std::get_if<GunnBlock<T>>(&b)) g->layer.mode = mode;
  }

  /// Logits [batch, classes]. With record set, keeps what backward() needs.
  Tensor<T> forward(const Tensor<T>& x, Phase phase, bool record = false) {
    if (x.rank() != 4 || x.channels() != spec_.input_channels) {
      throw ShapeError("network '" + spec_.name + "' expects [batch, " + std::to_string(spec_.input_channels) +
                       ", H, W] input, got " + to_string(x.shape()));
    }
    Tensor<T> h = stem_.forward(x, phase, record);
    if (spec_.stem.pool == PoolKind::max) {
      auto r = maxpool_forward(h);
      if (record) {
        stem_pool_shape_ = h.shape();
        stem_pool_argmax_ = std::move(r.argmax);
      }
      h = std::move(r.output);
    }
    for (auto& e : expand_) h = e.forward(h, phase, record);
    for (auto& b : blocks_) {
      if (auto* g = std::get_if<GunnBlock<T>>(&b)) {
        h = gunn_forward(h, g->layer, phase, record ? &g->tape : nullptr);
      } else {
        auto& t = std::get<TransitionBlock<T>>(b);
        h = t.conv.forward(h, phase, record);
        if (t.pool) {
          t.pre_pool = h.shape();
          h = avgpool2x2_forward(h);
        }
      }
    }
    if (record) gap_shape_ = h.shape();
    Tensor<T> features = global_avgpool_forward(h);
    if (record) features_ = features;
    recorded_ = record;
    return linear_forward(features, head_);
  }

  /// Backpropagates dL/dlogits through the last recorded forward pass, accumulating
  /// parameter gradients. Returns dL/dinput.
  Tensor<T> backward(const Tensor<T>& grad_logits) {
    if (!recorded_) throw ValidationError("backward() needs a preceding forward(..., record=true)");
    recorded_ = false;
    auto gl = linear_backward(features_, head_, grad_logits);
    accumulate(head_, gl);
    features_ = {};
    Tensor<T> g = global_avgpool_backward(gap_shape_, gl.input);
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      if (auto* gb = std::get_if<GunnBlock<T>>(&blocks_[i])) {
        g = layer_backward(gb->tape, gb->layer, g).grad_input;
      } else {
        auto& t = std::get<TransitionBlock<T>>(blocks_[i]);
        if (t.pool) g = avgpool2x2_backward(t.pre_pool, g);
        g = t.conv.backward(g);
      }
    }
    for (auto& e : expand_) g = e.backward(g);
    if (spec_.stem.pool == PoolKind::max) {
      g = maxpool_backward(stem_pool_shape_, stem_pool_argmax_, g);
      stem_pool_argmax_.clear();
    }
    return stem_.backward(g);
  }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    stem_.for_each_param(prefix + "stem", f);
    for (auto& e : expand_) e.for_each_param(prefix + "stem.expand", f);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = prefix + "stage" + std::to_string(i);
      if (auto* g = std::get_if<GunnBlock<T>>(&blocks_[i])) {
        g->layer.for_each_param(p, f);
      } else {
        std::get<TransitionBlock<T>>(blocks_[i]).conv.for_each_param(p + ".transition", f);
      }
    }
    head_.for_each_param(prefix + "head", f);
  }

  template <typename F>
  void for_each_batchnorm(const std::string& prefix, F&& f) {
    f(prefix + "stem.bn", stem_.bn);
    for (auto& e : expand_) f(prefix + "stem.expand.bn", e.bn);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = prefix + "stage" + std::to_string(i);
      if (auto* g = std::get_if<GunnBlock<T>>(&blocks_[i])) {
        g->layer.for_each_batchnorm(p, f);
      } else {
        f(p + ".transition.bn", std::get<TransitionBlock<T>>(blocks_[i]).conv.bn);
      }
    }
  }

  std::size_t parameter_count() {
    std::size_t total = 0;
    for_each_param("", [&](const std::string&, Param<T>& p) { total += p.size(); });
    return total;
  }

  void zero_grad() {
    for_each_param("", [](const std::string&, Param<T>& p) { p.zero_grad(); });
  }

  /// The gunn layer at stage index i (throws if that stage is a transition).
  GunnLayer<T>& gunn_layer(std::size_t stage) { return std::get<GunnBlock<T>>(blocks_.at(stage)).layer; }

  /// Feature map entering stage `stage` for input x (inference statistics unless phase says otherwise).
  Tensor<T> features_before(const Tensor<T>& x, std::size_t stage, Phase phase = Phase::inference) {
    Tensor<T> h = stem_.forward(x, phase, false);
    if (spec_.stem.pool == PoolKind::max) h = maxpool_forward(h).output;
    for (auto& e : expand_) h = e.forward(h, phase, false);
    for (std::size_t i = 0; i < stage && i < blocks_.size(); ++i) {
      if (auto* g = std::get_if<GunnBlock<T>>(&blocks_[i])) {
        h = gunn_forward(h, g->layer, phase);
      } else {
        auto& t = std::get<TransitionBlock<T>>(blocks_[i]);
        h = t.conv.forward(h, phase, false);
        if (t.pool) h = avgpool2x2_forward(h);
      }
    }
    return h;
  }

 private:
  NetworkSpec spec_;
  ConvBnRelu<T> stem_;
  Shape stem_pool_shape_;
  std::vector<std::size_t> stem_pool_argmax_;
  std::vector<ConvBnRelu<T>> expand_;
  std::vector<std::variant<GunnBlock<T>, TransitionBlock<T>>> blocks_;
  LinearParams<T> head_;
  Shape gap_shape_;
  Tensor<T> features_;
  bool recorded_ = false;
};

}  // namespace gunn
