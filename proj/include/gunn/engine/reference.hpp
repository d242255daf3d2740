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
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "gunn/core/rng.hpp"
#include "gunn/engine/gunn_layer.hpp"

namespace gunn {

/// Forward pass that keeps every intermediate state and unit cache.
template <typename T>
struct UnrolledForward {
  Tensor<T> output;
  std::vector<Tensor<T>> states;  // gradual: y_0 .. y_l; simultaneous: the input only
  std::vector<UnitCache<T>> caches;
};

template <typename T>
UnrolledForward<T> unrolled_forward(const Tensor<T>& x, GunnLayer<T>& layer, Phase phase = Phase::replay) {
  const std::size_t l = layer.size();
  const bool gradual = layer.mode == UpdateMode::gradual;
  UnrolledForward<T> r{x, {x}, std::vector<UnitCache<T>>(l)};
  for (std::size_t i = 0; i < l; ++i) {
    const auto seg = layer.partition.segment(i);
    const Tensor<T> f = unit_apply(gradual ? r.states.back() : x, layer.units[i], seg, phase, &r.caches[i]);
    for (std::size_t n = 0; n < x.batch(); ++n)
      for (std::size_t k = 0; k < seg.size(); ++k)
        std::copy_n(f.channel(n, k).begin(), x.plane(), r.output.channel(n, seg[k]).begin());
    if (gradual) r.states.push_back(r.output);
  }
  return r;
}

/// On/off pattern of every ReLU in the layer; a change between two nearby points means a
/// kink lies between them.
template <typename T>
std::vector<bool> relu_pattern(const UnrolledForward<T>& f) {
  std::vector<bool> out;
  for (const auto& c : f.caches)
    for (const auto& b : c.blocks) {
      for (T v : b.r1.data()) out.push_back(v > T{0});
      for (T v : b.r2.data()) out.push_back(v > T{0});
    }
  return out;
}

/// Straightforward backward pass of a gunn layer that keeps every intermediate state and
/// applies the chain rule unit by unit (the naive strategy of the memory account).
/// Accumulates parameter gradients like layer_backward and returns dL/dx.
template <typename T>
Tensor<T> unrolled_backward(const Tensor<T>& x, GunnLayer<T>& layer, const Tensor<T>& grad_out,
                            Phase phase = Phase::replay) {
  const std::size_t l = layer.size();
  const bool gradual = layer.mode == UpdateMode::gradual;
  UnrolledForward<T> fw = unrolled_forward(x, layer, phase);
  const auto& states = fw.states;
  auto& caches = fw.caches;
  auto split = [&](Tensor<T>& g, std::span<const std::size_t> seg) {
    Tensor<T> g_seg({x.batch(), seg.size(), x.height(), x.width()});
    for (std::size_t n = 0; n < x.batch(); ++n)
      for (std::size_t k = 0; k < seg.size(); ++k) {
        auto src = g.channel(n, seg[k]);
        std::copy(src.begin(), src.end(), g_seg.channel(n, k).begin());
        std::fill(src.begin(), src.end(), T{0});
      }
    return g_seg;
  };
  auto add_skip = [&](Tensor<T>& g, const UnitBackward<T>& bw, std::span<const std::size_t> seg) {
    g += bw.branch;
    if (!bw.skip) return;
    for (std::size_t n = 0; n < x.batch(); ++n)
      for (std::size_t k = 0; k < seg.size(); ++k) {
        auto dst = g.channel(n, seg[k]);
        auto src = bw.skip->channel(n, k);
        for (std::size_t p = 0; p < x.plane(); ++p) dst[p] += src[p];
      }
  };
  if (gradual) {
    Tensor<T> g = grad_out;
    for (std::size_t i = l; i-- > 0;) {
      const auto seg = layer.partition.segment(i);
      const Tensor<T> g_seg = split(g, seg);
      add_skip(g, unit_backward(states[i], layer.units[i], seg, caches[i], g_seg), seg);
    }
    return g;
  }
  Tensor<T> upstream = grad_out;
  std::vector<Tensor<T>> seg_grads;
  for (std::size_t i = 0; i < l; ++i) seg_grads.push_back(split(upstream, layer.partition.segment(i)));
  Tensor<T> g = upstream;  // channels left untouched by every unit pass straight through
  for (std::size_t i = 0; i < l; ++i) {
    const auto seg = layer.partition.segment(i);
    add_skip(g, unit_backward(x, layer.units[i], seg, caches[i], seg_grads[i]), seg);
  }
  return g;
}

/// Relative gradient error with a 1e-3 floor on the scale.
namespace detail {
inline std::string sci(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}
}  // namespace detail

inline double gradient_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

struct GradcheckOptions {
  std::size_t configs = 20;
  std::uint64_t seed = 0;
  UpdateMode mode = UpdateMode::gradual;
  double oracle_tolerance = 1e-10;
  double fd_tolerance = 1e-5;
  std::size_t fd_stride = 5;
};

struct GradcheckCase {
  std::string config;
  double oracle_error = 0;
  double fd_error = 0;
  std::string worst_block;
  double fd_analytic = 0;  // values at the worst finite-difference probe
  double fd_numeric = 0;
  std::size_t kinks = 0;  // finite-difference probes skipped at non-differentiable points
  bool pass = true;
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double max_oracle_error = 0;
  double max_fd_error = 0;
  std::vector<std::string> violations;

  bool pass() const { return violations.empty(); }
};

/// Samples small layers (N <= 24, P <= 6, K <= 2, M <= 2, spatial <= 8x8, batch <= 4) and
/// compares the layer's backward pass against unrolled_backward and central differences.
inline GradcheckReport run_gradcheck(const GradcheckOptions& opt) {
  if (opt.oracle_tolerance < 0 || opt.fd_tolerance < 0) throw ValidationError("tolerances must be non-negative");
  GradcheckReport report;
  Rng rng(opt.seed);
  std::uniform_int_distribution<int> pick_p(1, 6), pick_km(1, 2), pick_hw(2, 8), pick_b(2, 4), pick_s(0, 2);
  const ShortcutKind shortcuts[] = {ShortcutKind::identity, ShortcutKind::projection, ShortcutKind::none};
  const char* shortcut_name[] = {"identity", "projection", "none"};
  for (std::size_t c = 0; c < opt.configs; ++c) {
    const std::size_t P = std::size_t(pick_p(rng));
    std::uniform_int_distribution<int> pick_seg(1, std::min(4, int(24 / P)));
    const std::size_t N = P * std::size_t(pick_seg(rng));
    const std::size_t K = std::size_t(pick_km(rng)), M = std::size_t(pick_km(rng));
    const std::size_t hw = std::size_t(pick_hw(rng)), B = std::size_t(pick_b(rng));
    const int pick_index = pick_s(rng);
    const ShortcutKind sc = shortcuts[pick_index];
    auto layer = make_gunn_layer<double>(N, P, K, M, sc, opt.mode);
    layer.for_each_param("", [&](const std::string&, Param<double>& p) {
      if (p.role == ParamRole::bn_scale) {
        fill_uniform(p.value, rng, 0.5, 1.5);
      } else {
        fill_normal(p.value, rng, 0.0, 0.5);
      }
    });
    Tensor<double> x = random_normal<double>({B, N, hw, hw}, rng);
    const Tensor<double> w = random_normal<double>({B, N, hw, hw}, rng);

    GradcheckCase gc;
    gc.config = "N=" + std::to_string(N) + " P=" + std::to_string(P) + " K=" + std::to_string(K) + " M=" +
                std::to_string(M) + " " + shortcut_name[pick_index] + " " + std::to_string(B) + "x" + std::to_string(hw) + "x" +
                std::to_string(hw);

    auto grads = [&] {
      std::vector<std::pair<std::string, std::vector<double>>> out;
      layer.for_each_param("", [&](const std::string& name, Param<double>& p) {
        out.emplace_back(name, std::vector<double>(p.grad.data().begin(), p.grad.data().end()));
        p.zero_grad();
      });
      return out;
    };
    StageTape<double> tape;
    gunn_forward(x, layer, Phase::replay, &tape);
    const Tensor<double> gx = layer_backward(tape, layer, w).grad_input;
    const auto analytic = grads();
    const Tensor<double> rx = unrolled_backward(x, layer, w);
    const auto reference = grads();

    std::string oracle_block = "input";
    for (std::size_t i = 0; i < gx.size(); ++i) gc.oracle_error = std::max(gc.oracle_error, gradient_error(gx[i], rx[i]));
    for (std::size_t b = 0; b < analytic.size(); ++b) {
      for (std::size_t i = 0; i < analytic[b].second.size(); ++i) {
        const double e = gradient_error(analytic[b].second[i], reference[b].second[i]);
        if (e > gc.oracle_error) gc.oracle_error = e, oracle_block = analytic[b].first;
      }
    }

    // Richardson-extrapolated central difference from steps h and h/2. Probes whose +h and
    // -h points see different ReLU patterns straddle a kink and are skipped.
    auto central = [&](double& v) -> std::optional<double> {
      const double h = 1e-4, orig = v;
      auto eval = [&](double at, std::vector<bool>* pattern) {
        v = at;
        const auto f = unrolled_forward(x, layer);
        if (pattern) *pattern = relu_pattern(f);
        double s = 0;
        for (std::size_t i = 0; i < f.output.size(); ++i) s += f.output[i] * w[i];
        return s;
      };
      std::vector<bool> p_up, p_down;
      const double up = eval(orig + h, &p_up);
      const double down = eval(orig - h, &p_down);
      if (p_up != p_down) {
        v = orig;
        return std::nullopt;
      }
      const double half_up = eval(orig + h / 2, nullptr);
      const double half_down = eval(orig - h / 2, nullptr);
      v = orig;
      const double coarse = (up - down) / (2 * h), fine = (half_up - half_down) / h;
      return (4 * fine - coarse) / 3;
    };
    double fd_worst = 0;
    std::string fd_block;
    for (std::size_t i = 0; i < x.size(); i += opt.fd_stride) {
      const auto num = central(x[i]);
      if (!num) {
        ++gc.kinks;
        continue;
      }
      const double e = gradient_error(gx[i], *num);
      if (e > fd_worst) fd_worst = e, fd_block = "input", gc.fd_analytic = gx[i], gc.fd_numeric = *num;
    }
    std::size_t b = 0;
    layer.for_each_param("", [&](const std::string& name, Param<double>& p) {
      for (std::size_t i = 0; i < p.size(); i += opt.fd_stride) {
        const auto num = central(p.value[i]);
        if (!num) {
          ++gc.kinks;
          continue;
        }
        const double e = gradient_error(analytic[b].second[i], *num);
        if (e > fd_worst) fd_worst = e, fd_block = name, gc.fd_analytic = analytic[b].second[i], gc.fd_numeric = *num;
      }
      ++b;
    });
    gc.fd_error = fd_worst;
    if (!(gc.fd_error < opt.fd_tolerance)) {
      gc.pass = false;
      gc.worst_block = fd_block;
      report.violations.push_back(gc.config + ": finite-difference error " + detail::sci(gc.fd_error) + " in " +
                                  fd_block);
    }
    if (!(gc.oracle_error < opt.oracle_tolerance)) {
      gc.pass = false;
      gc.worst_block = oracle_block;
      report.violations.push_back(gc.config + ": oracle error " + detail::sci(gc.oracle_error) + " in " +
                                  oracle_block);
    }
    report.max_oracle_error = std::max(report.max_oracle_error, gc.oracle_error);
    report.max_fd_error = std::max(report.max_fd_error, gc.fd_error);
    report.cases.push_back(gc);
  }
  return report;
}

}  // namespace gunn
