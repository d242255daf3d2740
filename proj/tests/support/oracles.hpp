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
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gunn/gunn.hpp"

namespace gunn::testing {

/// Direct nested-loop convolution, no patch gathering.
inline Tensor<double> naive_conv2d(const Tensor<double>& x, const ConvParams<double>& p) {
  const std::size_t kh = p.kernel_h(), kw = p.kernel_w();
  const std::size_t oh = (x.height() + 2 * p.padding - kh) / p.stride + 1;
  const std::size_t ow = (x.width() + 2 * p.padding - kw) / p.stride + 1;
  Tensor<double> y({x.batch(), p.out_channels(), oh, ow});
  for (std::size_t n = 0; n < x.batch(); ++n)
    for (std::size_t o = 0; o < p.out_channels(); ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = p.bias ? p.bias->value[o] : 0.0;
          for (std::size_t c = 0; c < x.channels(); ++c)
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t b = 0; b < kw; ++b) {
                const long r = static_cast<long>(i * p.stride + a) - static_cast<long>(p.padding);
                const long s = static_cast<long>(j * p.stride + b) - static_cast<long>(p.padding);
                if (r < 0 || s < 0 || r >= static_cast<long>(x.height()) || s >= static_cast<long>(x.width())) continue;
                acc += p.weight.value.at(o, c, a, b) * x.at(n, c, r, s);
              }
          y.at(n, o, i, j) = acc;
        }
  return y;
}

/// Error measure for gradient comparisons: relative, with a floor on the scale so that
/// entries that are zero analytically compare absolutely.
inline double grad_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
}

/// Central difference of loss() with respect to *v.
inline double central_difference(const std::function<double()>& loss, double* v, double h = 1e-5) {
  const double orig = *v;
  *v = orig + h;
  const double up = loss();
  *v = orig - h;
  const double down = loss();
  *v = orig;
  return (up - down) / (2 * h);
}

/// Checks every entry of `values` against the analytic gradient `analytic`.
/// Returns the worst error seen.
inline double check_gradient(const std::function<double()>& loss, Tensor<double>& values, const Tensor<double>& analytic,
                             double tol, const std::string& what, std::size_t stride = 1) {
  EXPECT_EQ(values.shape(), analytic.shape()) << what;
  double worst = 0;
  for (std::size_t i = 0; i < values.size(); i += stride) {
    const double num = central_difference(loss, &values[i]);
    const double err = grad_error(analytic[i], num);
    worst = std::max(worst, err);
    EXPECT_LT(err, tol) << what << "[" << i << "] analytic " << analytic[i] << " numeric " << num;
  }
  return worst;
}

/// Weighted-sum loss sum(w * y) whose output gradient is w.
inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <typename Module>
void randomize_params(Module& m, Rng& rng, double stddev = 0.5) {
  m.for_each_param("", [&](const std::string&, Param<double>& p) {
    if (p.role == ParamRole::bn_scale) {
      fill_uniform(p.value, rng, 0.5, 1.5);
    } else {
      fill_normal(p.value, rng, 0.0, stddev);
    }
  });
}

template <typename Module>
void zero_grads(Module& m) {
  m.for_each_param("", [](const std::string&, Param<double>& p) { p.zero_grad(); });
}

/// Reference adjoint of the gradual layer: keeps every intermediate state y_0..y_l and
/// propagates through each stage with the plain chain rule, no reversal and no merging.
inline Tensor<double> unrolled_gradual_adjoint(const Tensor<double>& x, GunnLayer<double>& layer,
                                               const Tensor<double>& grad_out) {
  const std::size_t l = layer.size();
  std::vector<Tensor<double>> states{x};
  std::vector<UnitCache<double>> caches(l);
  for (std::size_t i = 0; i < l; ++i) {
    auto seg = layer.partition.segment(i);
    Tensor<double> next = states.back();
    Tensor<double> f = unit_apply(states.back(), layer.units[i], seg, Phase::replay, &caches[i]);
    for (std::size_t n = 0; n < x.batch(); ++n)
      for (std::size_t k = 0; k < seg.size(); ++k)
        for (std::size_t p = 0; p < x.plane(); ++p) next.channel(n, seg[k])[p] = f.channel(n, k)[p];
    states.push_back(std::move(next));
  }
  Tensor<double> g = grad_out;
  for (std::size_t i = l; i-- > 0;) {
    auto seg = layer.partition.segment(i);
    Tensor<double> g_seg({x.batch(), seg.size(), x.height(), x.width()});
    for (std::size_t n = 0; n < x.batch(); ++n)
      for (std::size_t k = 0; k < seg.size(); ++k)
        for (std::size_t p = 0; p < x.plane(); ++p) {
          g_seg.channel(n, k)[p] = g.channel(n, seg[k])[p];
          g.channel(n, seg[k])[p] = 0.0;
        }
    auto bw = unit_backward(states[i], layer.units[i], seg, caches[i], g_seg);
    g += bw.branch;
    if (bw.skip) {
      for (std::size_t n = 0; n < x.batch(); ++n)
        for (std::size_t k = 0; k < seg.size(); ++k)
          for (std::size_t p = 0; p < x.plane(); ++p) g.channel(n, seg[k])[p] += bw.skip->channel(n, k)[p];
    }
  }
  return g;
}

/// Collects every parameter gradient of a module into one flat vector.
template <typename Module>
std::vector<double> flat_grads(Module& m) {
  std::vector<double> out;
  m.for_each_param("", [&](const std::string&, Param<double>& p) {
    out.insert(out.end(), p.grad.data().begin(), p.grad.data().end());
  });
  return out;
}

}  // namespace gunn::testing
