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

#include <string>

#include <Eigen/Dense>

#include "gunn/core/error.hpp"

namespace gunn::lab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

///   plain    - y_i = sum_j w_ij x_j
///   residual - y_i = x_i + sum_j w_ij x_j
///   gradual  - y_i = x_i + sum_{j<i} w_ij y_j + sum_{j>=i} w_ij x_j, evaluated for ascending i
enum class Form { plain, residual, gradual };

inline std::string to_string(Form f) {
  switch (f) {
    case Form::plain:
      return "plain";
    case Form::residual:
      return "residual";
    case Form::gradual:
      return "gradual";
  }
  return "?";
}

inline Form parse_form(const std::string& s) {
  if (s == "plain") return Form::plain;
  if (s == "residual") return Form::residual;
  if (s == "gradual") return Form::gradual;
  throw ValidationError("form '" + s + "' is not plain|residual|gradual");
}

struct LinearModel {
  Form form = Form::gradual;
  Matrix omega;

  LinearModel() = default;
  LinearModel(Form f, Matrix w) : form(f), omega(std::move(w)) {
    if (omega.rows() != omega.cols() || omega.rows() == 0) throw ValidationError("linear model weights must be square");
  }

  Eigen::Index n() const { return omega.rows(); }
};

namespace detail {

inline void require_dim(const LinearModel& m, const Vector& v, const char* what) {
  if (v.size() != m.n()) {
    throw ValidationError(std::string(what) + " has dimension " + std::to_string(v.size()) + ", model has " +
                          std::to_string(m.n()));
  }
}

}  // namespace detail

inline Vector eval_linear(const LinearModel& m, const Vector& x) {
  detail::require_dim(m, x, "input");
  switch (m.form) {
    case Form::plain:
      return m.omega * x;
    case Form::residual:
      return x + m.omega * x;
    case Form::gradual: {
      Vector y = x;
      for (Eigen::Index i = 0; i < m.n(); ++i) y(i) = x(i) + m.omega.row(i).dot(y);
      return y;
    }
  }
  return {};
}

/// Total derivative of L with respect to each output, given the explicit partials grad_y.
/// In gradual form later outputs read earlier ones, so
/// gbar_i = grad_y_i + sum_{k>i} w_ki gbar_k.
inline Vector total_output_gradient(const LinearModel& m, const Vector& grad_y) {
  detail::require_dim(m, grad_y, "output gradient");
  if (m.form != Form::gradual) return grad_y;
  Vector g = grad_y;
  for (Eigen::Index i = m.n() - 1; i >= 0; --i)
    for (Eigen::Index k = i + 1; k < m.n(); ++k) g(i) += m.omega(k, i) * g(k);
  return g;
}

/// Values each row of omega multiplies: x for plain/residual; y_j (j < i) or x_j (j >= i) for gradual.
/// Row i of the result is that row's input vector.
inline Matrix weight_inputs(const LinearModel& m, const Vector& x) {
  const Eigen::Index n = m.n();
  Matrix in(n, n);
  if (m.form != Form::gradual) {
    for (Eigen::Index i = 0; i < n; ++i) in.row(i) = x.transpose();
    return in;
  }
  const Vector y = eval_linear(m, x);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) in(i, j) = j < i ? y(j) : x(j);
  return in;
}

/// dL/d omega for one input.
inline Matrix omega_gradient(const LinearModel& m, const Vector& x, const Vector& grad_y) {
  detail::require_dim(m, x, "input");
  const Vector g = total_output_gradient(m, grad_y);
  return g.asDiagonal() * weight_inputs(m, x);
}

/// Input gradient dL/dx.
inline Vector input_gradient(const LinearModel& m, const Vector& grad_y) {
  const Vector g = total_output_gradient(m, grad_y);
  switch (m.form) {
    case Form::plain:
      return m.omega.transpose() * g;
    case Form::residual:
      return g + m.omega.transpose() * g;
    case Form::gradual: {
      Vector gx = g;  // identity path
      for (Eigen::Index i = 0; i < m.n(); ++i)
        for (Eigen::Index j = i; j < m.n(); ++j) gx(j) += m.omega(i, j) * g(i);
      return gx;
    }
  }
  return {};
}

/// One descent step: omega -= epsilon * dL/d omega.
inline LinearModel gd_step(const LinearModel& m, const Vector& x, const Vector& grad_y, double epsilon) {
  if (!(epsilon > 0)) throw ValidationError("gd_step needs a positive learning rate");
  LinearModel out = m;
  out.omega -= epsilon * omega_gradient(m, x, grad_y);
  return out;
}

/// First-order change of the gradual model's output at x after gd_step(m, x, grad_y, epsilon):
/// dy_i = -epsilon gbar_i (sum_{j<i} y_j^2 + sum_{j>=i} x_j^2) + sum_{j<i} w_ij dy_j,
/// with gbar the total output gradient.
inline Vector delta_y_predicted(const LinearModel& m, const Vector& x, const Vector& grad_y, double epsilon) {
  if (m.form != Form::gradual) throw ValidationError("delta_y_predicted is defined for the gradual form");
  detail::require_dim(m, x, "input");
  const Vector y = eval_linear(m, x);
  const Vector g = total_output_gradient(m, grad_y);
  Vector dy = Vector::Zero(m.n());
  for (Eigen::Index i = 0; i < m.n(); ++i) {
    double energy = 0;
    for (Eigen::Index j = 0; j < m.n(); ++j) energy += j < i ? y(j) * y(j) : x(j) * x(j);
    dy(i) = -epsilon * g(i) * energy;
    for (Eigen::Index j = 0; j < i; ++j) dy(i) += m.omega(i, j) * dy(j);
  }
  return dy;
}

}  // namespace gunn::lab
