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
#include <cstdint>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gunn/core/rng.hpp"
#include "gunn/lab/linear_model.hpp"

namespace gunn::lab {

struct PairGap {
  std::size_t p = 0;
  std::size_t q = 0;
  double gap = 0;
};

struct CollapseReport {
  std::vector<PairGap> pairs;
  std::vector<PairGap> collapsed;
  std::size_t probe_count = 0;
  double threshold = 0;
  bool probe_deficient = false;

  double min_gap() const {
    double m = INFINITY;
    for (const auto& p : pairs) m = std::min(m, p.gap);
    return m;
  }
  double mean_gap() const {
    double s = 0;
    for (const auto& p : pairs) s += p.gap;
    return pairs.empty() ? 0 : s / double(pairs.size());
  }
};

inline constexpr std::size_t kMinProbes = 32;

/// Gap for every requested pair of columns of `activations` (rows: probe entries).
/// With no pair list, all pairs p < q are examined.
inline CollapseReport collapse_gaps(const Matrix& activations, std::size_t probes, double threshold,
                                    const std::vector<std::pair<std::size_t, std::size_t>>& pairs = {}) {
  if (probes == 0 || activations.rows() == 0) throw ValidationError("collapse detection needs a non-empty probe set");
  if (probes < kMinProbes) {
    throw ValidationError("collapse detection needs at least " + std::to_string(kMinProbes) + " probes, got " +
                          std::to_string(probes));
  }
  CollapseReport r;
  r.probe_count = probes;
  r.threshold = threshold;
  auto add = [&](std::size_t p, std::size_t q) {
    const double gap = (activations.col(Eigen::Index(p)) - activations.col(Eigen::Index(q))).cwiseAbs().maxCoeff();
    r.pairs.push_back({p, q, gap});
    if (gap < threshold) r.collapsed.push_back({p, q, gap});
  };
  if (pairs.empty()) {
    for (std::size_t p = 0; p < std::size_t(activations.cols()); ++p)
      for (std::size_t q = p + 1; q < std::size_t(activations.cols()); ++q) add(p, q);
  } else {
    for (auto [p, q] : pairs) add(std::min(p, q), std::max(p, q));
  }
  return r;
}

/// Pairs of outputs of `m` whose values agree to within `threshold` on every probe
/// (rows of `probes`). A probe set that does not span the input space cannot tell
/// neurons apart, so it is flagged instead of reporting collapse.
inline CollapseReport detect_collapse(const LinearModel& m, const Matrix& probes, double threshold = 1e-9) {
  if (probes.rows() == 0) throw ValidationError("collapse detection needs a non-empty probe set");
  if (probes.cols() != m.n()) throw ValidationError("probe dimension differs from the model dimension");
  Matrix acts(probes.rows(), m.n());
  for (Eigen::Index k = 0; k < probes.rows(); ++k) acts.row(k) = eval_linear(m, probes.row(k).transpose()).transpose();
  CollapseReport r = collapse_gaps(acts, std::size_t(probes.rows()), threshold);
  Eigen::FullPivLU<Matrix> lu(probes);
  if (lu.rank() < m.n()) {
    r.probe_deficient = true;
    r.collapsed.clear();
  }
  return r;
}

inline Matrix normal_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> d(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

struct CollapseExperimentConfig {
  Form form = Form::gradual;
  std::size_t n = 6;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 0.01;
  std::size_t samples = 64;
  std::size_t probes = 128;
  std::size_t p = 1;  // the watched pair is (p, p + 1)
  bool coincident = true;  // false: plain random initialization
};

struct CollapseStep {
  std::size_t step = 0;
  double gap = 0;
  double loss = 0;
};

struct CollapseSeries {
  CollapseExperimentConfig config;
  std::vector<CollapseStep> steps;
};

/// Initial weights with outputs p and q = p + 1 coincident for every input:
///   plain    - equal rows
///   residual - w_pp + 1 = w_qp, w_qq + 1 = w_pq, remaining entries of both rows equal
///   gradual  - y_q = y_p through w_qp = 1, w_qq = -1, all other entries of row q zero
inline LinearModel coincident_model(Form form, std::size_t n, std::size_t p, Rng& rng) {
  if (n < 2 || p + 1 >= n) throw ValidationError("collapse experiment needs n >= 2 and p + 1 < n");
  const auto P = Eigen::Index(p), Q = Eigen::Index(p + 1);
  Matrix w = normal_matrix(Eigen::Index(n), Eigen::Index(n), rng, std::sqrt(2.0 / double(n)));
  switch (form) {
    case Form::plain:
      w.row(Q) = w.row(P);
      break;
    case Form::residual:
      w.row(Q) = w.row(P);
      w(Q, P) = w(P, P) + 1;
      w(P, Q) = w(Q, Q) + 1;
      break;
    case Form::gradual:
      w.row(Q).setZero();
      w(Q, P) = 1;
      w(Q, Q) = -1;
      break;
  }
  return LinearModel(form, w);
}

/// Trains a coincident model by full-batch gradient descent on a fixed regression task
/// L = 1/(2B) sum_b |A y_b - t_b|^2, where the readout A has equal columns p and q so that
/// the watched pair receives identical output gradients. Records the pair's gap over a
/// fixed probe set after every step.
inline CollapseSeries run_collapse_experiment(const CollapseExperimentConfig& cfg) {
  if (cfg.learning_rate < 0) throw ValidationError("learning rate must be non-negative");
  Rng rng(derive_seed(cfg.seed, 0));
  LinearModel model = coincident_model(cfg.form, cfg.n, cfg.p, rng);
  if (!cfg.coincident) model.omega = normal_matrix(model.n(), model.n(), rng, std::sqrt(2.0 / double(cfg.n)));
  const auto N = Eigen::Index(cfg.n), P = Eigen::Index(cfg.p), Q = Eigen::Index(cfg.p + 1);
  Rng data_rng(derive_seed(cfg.seed, 1));
  Matrix A = normal_matrix(N, N, data_rng, 1.0 / std::sqrt(double(cfg.n)));
  A.col(Q) = A.col(P);
  const Matrix X = normal_matrix(Eigen::Index(cfg.samples), N, data_rng);
  const Matrix T = normal_matrix(Eigen::Index(cfg.samples), N, data_rng);
  Rng probe_rng(derive_seed(cfg.seed, 2));
  const Matrix probes = normal_matrix(Eigen::Index(cfg.probes), N, probe_rng);

  auto gap = [&] {
    double g = 0;
    for (Eigen::Index k = 0; k < probes.rows(); ++k) {
      const Vector y = eval_linear(model, probes.row(k).transpose());
      g = std::max(g, std::abs(y(P) - y(Q)));
    }
    return g;
  };
  const double scale = 1.0 / double(cfg.samples);
  auto loss_and_grad = [&](Matrix* grad) {
    double loss = 0;
    if (grad) grad->setZero(N, N);
    for (Eigen::Index b = 0; b < X.rows(); ++b) {
      const Vector x = X.row(b).transpose();
      const Vector r = A * eval_linear(model, x) - T.row(b).transpose();
      loss += 0.5 * scale * r.squaredNorm();
      if (grad) *grad += omega_gradient(model, x, scale * (A.transpose() * r));
    }
    return loss;
  };

  CollapseSeries out{cfg, {}};
  Matrix grad;
  out.steps.push_back({0, gap(), loss_and_grad(nullptr)});
  for (std::size_t s = 1; s <= cfg.steps; ++s) {
    loss_and_grad(&grad);
    if (cfg.learning_rate > 0) model.omega -= cfg.learning_rate * grad;
    out.steps.push_back({s, gap(), loss_and_grad(nullptr)});
  }
  return out;
}

/// CSV: a comment line echoing the configuration, then step,pair,gap,loss.
inline void write_collapse_csv(std::ostream& os, const CollapseSeries& s) {
  const auto& c = s.config;
  os << "# form=" << to_string(c.form) << " n=" << c.n << " steps=" << c.steps << " seed=" << c.seed
     << " lr=" << c.learning_rate << " samples=" << c.samples << " probes=" << c.probes
     << " init=" << (c.coincident ? "coincident" : "random") << "\n";
  os << "step,pair,gap,loss\n";
  os << std::setprecision(17);
  for (const auto& r : s.steps) os << r.step << "," << c.p << "-" << c.p + 1 << "," << r.gap << "," << r.loss << "\n";
}

}  // namespace gunn::lab
