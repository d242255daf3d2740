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

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "gunn/core/blas.hpp"
#include "gunn/core/tensor.hpp"
#include "gunn/ops/param.hpp"

namespace gunn {

/// 2-D convolution weights [out, in, kh, kw] with optional per-output bias.
template <typename T>
struct ConvParams {
  Param<T> weight;
  std::optional<Param<T>> bias;
  std::size_t stride = 1;
  std::size_t padding = 0;

  ConvParams() = default;
  ConvParams(std::size_t out_ch, std::size_t in_ch, std::size_t kernel, std::size_t stride_ = 1,
             std::size_t padding_ = 0, bool with_bias = false)
      : weight(Tensor<T>({out_ch, in_ch, kernel, kernel}), ParamRole::weight), stride(stride_), padding(padding_) {
    if (stride == 0) throw ValidationError("convolution stride must be positive");
    if (with_bias) bias.emplace(Tensor<T>({out_ch}), ParamRole::bias);
  }

  std::size_t out_channels() const { return weight.value.dim(0); }
  std::size_t in_channels() const { return weight.value.dim(1); }
  std::size_t kernel_h() const { return weight.value.dim(2); }
  std::size_t kernel_w() const { return weight.value.dim(3); }
  std::size_t parameter_count() const { return weight.size() + (bias ? bias->size() : 0); }

  template <typename F>
  void for_each_param(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    if (bias) f(prefix + ".bias", *bias);
  }
};

template <typename T>
struct ConvGrads {
  Tensor<T> input;
  Tensor<T> weight;
  std::optional<Tensor<T>> bias;
};

inline std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < kernel) return 0;
  return (in + 2 * pad - kernel) / stride + 1;
}

namespace detail {

template <typename T>
Shape conv_output_shape(const Tensor<T>& input, const ConvParams<T>& p) {
  if (input.rank() != 4 || input.channels() != p.in_channels()) {
    throw ShapeError("conv2d: input " + to_string(input.shape()) + " incompatible with weights " +
                     to_string(p.weight.value.shape()));
  }
  const auto oh = conv_output_extent(input.height(), p.kernel_h(), p.stride, p.padding);
  const auto ow = conv_output_extent(input.width(), p.kernel_w(), p.stride, p.padding);
  if (oh == 0 || ow == 0) {
    throw ShapeError("conv2d: input " + to_string(input.shape()) + " admits no output position for weights " +
                     to_string(p.weight.value.shape()));
  }
  return {input.batch(), p.out_channels(), oh, ow};
}

template <typename T>
bool is_pointwise(const ConvParams<T>& p) {
  return p.kernel_h() == 1 && p.kernel_w() == 1 && p.stride == 1 && p.padding == 0;
}

// Output columns [lo, hi) whose input column x*stride + k - pad lies inside [0, w).
inline void valid_columns(std::size_t w, std::size_t k, std::size_t stride, std::size_t pad, std::size_t ow,
                          std::size_t& lo, std::size_t& hi) {
  lo = k >= pad ? 0 : (pad - k + stride - 1) / stride;
  hi = w + pad > k ? std::min(ow, (w + pad - k - 1) / stride + 1) : 0;
  if (lo > hi) lo = hi;
}

// Patch gather for one sample: col is [C*kh*kw, oh*ow].
template <typename T>
void im2col(const T* img, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, T* col) {
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        T* row = col + ((ch * kh + ki) * kw + kj) * oh * ow;
        std::size_t lo, hi;
        valid_columns(w, kj, stride, pad, ow, lo, hi);
        for (std::size_t y = 0; y < oh; ++y) {
          T* out = row + y * ow;
          const std::size_t iy = y * stride + ki;
          if (iy < pad || iy - pad >= h) {
            std::fill(out, out + ow, T{0});
            continue;
          }
          const T* src = img + (ch * h + iy - pad) * w;
          std::fill(out, out + lo, T{0});
          if (stride == 1) {
            std::copy(src + lo + kj - pad, src + hi + kj - pad, out + lo);
          } else {
            for (std::size_t x = lo; x < hi; ++x) out[x] = src[x * stride + kj - pad];
          }
          std::fill(out + hi, out + ow, T{0});
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into the image.
template <typename T>
void col2im(const T* col, std::size_t c, std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
            std::size_t stride, std::size_t pad, std::size_t oh, std::size_t ow, T* img) {
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const T* row = col + ((ch * kh + ki) * kw + kj) * oh * ow;
        std::size_t lo, hi;
        valid_columns(w, kj, stride, pad, ow, lo, hi);
        for (std::size_t y = 0; y < oh; ++y) {
          const std::size_t iy = y * stride + ki;
          if (iy < pad || iy - pad >= h) continue;
          T* dst = img + (ch * h + iy - pad) * w;
          const T* src = row + y * ow;
          for (std::size_t x = lo; x < hi; ++x) dst[x * stride + kj - pad] += src[x];
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvParams<T>& p) {
  Tensor<T> out(detail::conv_output_shape(input, p));
  const std::size_t cin = input.channels(), cout = p.out_channels();
  const std::size_t in_plane = input.plane(), out_plane = out.plane();
  const std::size_t patch = cin * p.kernel_h() * p.kernel_w();
  const bool pointwise = detail::is_pointwise(p);
  std::vector<T> col(pointwise ? 0 : patch * out_plane);

  for (std::size_t n = 0; n < input.batch(); ++n) {
    const T* x = input.raw() + n * cin * in_plane;
    T* y = out.raw() + n * cout * out_plane;
    const T* b = x;
    if (!pointwise) {
      detail::im2col(x, cin, input.height(), input.width(), p.kernel_h(), p.kernel_w(), p.stride, p.padding,
                     out.height(), out.width(), col.data());
      b = col.data();
    }
    blas::gemm(false, false, cout, out_plane, patch, T{1}, p.weight.value.raw(), patch, b, out_plane, T{0}, y,
               out_plane);
    if (p.bias) {
      for (std::size_t o = 0; o < cout; ++o) {
        const T bo = p.bias->value[o];
        for (std::size_t i = 0; i < out_plane; ++i) y[o * out_plane + i] += bo;
      }
    }
  }
  return out;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor<T>& input, const ConvParams<T>& p, const Tensor<T>& grad_out) {
  const Shape expected = detail::conv_output_shape(input, p);
  if (grad_out.shape() != expected) {
    throw ShapeError("conv2d_backward: grad_out " + to_string(grad_out.shape()) + " does not match output shape " +
                     to_string(expected));
  }
  ConvGrads<T> g{Tensor<T>::zeros_like(input), Tensor<T>::zeros_like(p.weight.value), std::nullopt};
  if (p.bias) g.bias.emplace(Tensor<T>::zeros_like(p.bias->value));

  const std::size_t cin = input.channels(), cout = p.out_channels();
  const std::size_t in_plane = input.plane(), out_plane = grad_out.plane();
  const std::size_t patch = cin * p.kernel_h() * p.kernel_w();
  const bool pointwise = detail::is_pointwise(p);
  std::vector<T> col(pointwise ? 0 : patch * out_plane);
  std::vector<T> grad_col(pointwise ? 0 : patch * out_plane);

  for (std::size_t n = 0; n < input.batch(); ++n) {
    const T* x = input.raw() + n * cin * in_plane;
    const T* gy = grad_out.raw() + n * cout * out_plane;
    T* gx = g.input.raw() + n * cin * in_plane;
    if (pointwise) {
      blas::gemm(false, true, cout, cin, out_plane, T{1}, gy, out_plane, x, out_plane, T{1}, g.weight.raw(), cin);
      blas::gemm(true, false, cin, out_plane, cout, T{1}, p.weight.value.raw(), cin, gy, out_plane, T{0}, gx,
                 out_plane);
    } else {
      detail::im2col(x, cin, input.height(), input.width(), p.kernel_h(), p.kernel_w(), p.stride, p.padding,
                     grad_out.height(), grad_out.width(), col.data());
      blas::gemm(false, true, cout, patch, out_plane, T{1}, gy, out_plane, col.data(), out_plane, T{1},
                 g.weight.raw(), patch);
      blas::gemm(true, false, patch, out_plane, cout, T{1}, p.weight.value.raw(), patch, gy, out_plane, T{0},
                 grad_col.data(), out_plane);
      detail::col2im(grad_col.data(), cin, input.height(), input.width(), p.kernel_h(), p.kernel_w(), p.stride,
                     p.padding, grad_out.height(), grad_out.width(), gx);
    }
    if (g.bias) {
      for (std::size_t o = 0; o < cout; ++o) {
        T acc{0};
        for (std::size_t i = 0; i < out_plane; ++i) acc += gy[o * out_plane + i];
        (*g.bias)[o] += acc;
      }
    }
  }
  return g;
}

/// Adds the weight/bias gradients of `g` into the parameter accumulators.
template <typename T>
void accumulate(ConvParams<T>& p, const ConvGrads<T>& g) {
  p.weight.grad += g.weight;
  if (p.bias && g.bias) p.bias->grad += *g.bias;
}

}  // namespace gunn
