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
#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gunn/arch/network.hpp"
#include "gunn/lab/collapse.hpp"

namespace gunn::lab {

struct StageCollapse {
  std::size_t stage = 0;
  CollapseReport report;
};

struct NetworkCollapse {
  std::vector<StageCollapse> stages;

  /// Mean within-segment gap over every gunn stage.
  double mean_gap() const {
    double s = 0;
    std::size_t n = 0;
    for (const auto& st : stages)
      for (const auto& p : st.report.pairs) s += p.gap, ++n;
    return n ? s / double(n) : 0;
  }
  std::size_t collapsed() const {
    std::size_t n = 0;
    for (const auto& st : stages) n += st.report.collapsed.size();
    return n;
  }
};

/// Spatially pooled channel responses, one row per image, each column standardized
/// over the probe set. Constant channels become all-zero columns.
template <typename T>
Matrix pooled_standardized(const Tensor<T>& h) {
  const auto& s = h.shape();
  const std::size_t B = s[0], C = s[1], HW = s[2] * s[3];
  Matrix a(static_cast<Eigen::Index>(B), static_cast<Eigen::Index>(C));
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const auto p = h.data().subspan((b * C + c) * HW, HW);
      double acc = 0;
      for (std::size_t i = 0; i < HW; ++i) acc += double(p[i]);
      a(Eigen::Index(b), Eigen::Index(c)) = acc / double(HW);
    }
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double mean = a.col(c).mean();
    a.col(c).array() -= mean;
    const double sd = std::sqrt(a.col(c).squaredNorm() / double(a.rows()));
    if (sd > 0) a.col(c) /= sd;
  }
  return a;
}

/// Collapse gaps between channels of the same segment at the output of every gunn stage,
/// measured on `probes` with inference statistics.
template <typename T>
NetworkCollapse network_collapse(Network<T>& net, const Tensor<T>& probes, double threshold = 1e-3) {
  NetworkCollapse out;
  const auto& spec = net.spec();
  for (std::size_t i = 0; i < spec.stages.size(); ++i) {
    if (!std::holds_alternative<GunnStageSpec>(spec.stages[i])) continue;
    const Matrix acts = pooled_standardized(net.features_before(probes, i + 1));
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& seg : net.gunn_layer(i).partition.segments())
      for (std::size_t a = 0; a < seg.size(); ++a)
        for (std::size_t b = a + 1; b < seg.size(); ++b) pairs.emplace_back(seg[a], seg[b]);
    out.stages.push_back({i, collapse_gaps(acts, probes.shape()[0], threshold, pairs)});
  }
  return out;
}

}  // namespace gunn::lab
