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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gunn/arch/network.hpp"
#include "gunn/core/blas.hpp"
#include "gunn/core/digest.hpp"
#include "gunn/ops/linear.hpp"
#include "gunn/train/augment.hpp"
#include "gunn/train/checkpoint.hpp"
#include "gunn/train/cifar.hpp"
#include "gunn/train/config.hpp"
#include "gunn/train/sgd.hpp"

namespace gunn::train {

struct MetricRow {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double train_loss = 0;
  double train_err = 0;
  double test_err = std::numeric_limits<double>::quiet_NaN();  // set on the last step of an evaluated epoch
  double lr = 0;
  double wall_seconds = 0;
};

inline constexpr const char* kMetricHeader = "epoch,step,train_loss,train_err,test_err,lr,wall_seconds";

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// One CSV line; without wall time the line is a pure function of the computation.
inline std::string format_row(const MetricRow& r, bool with_wall = true) {
  std::string s = std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + format_number(r.train_loss) + "," +
                  format_number(r.train_err) + "," + format_number(r.test_err) + "," + format_number(r.lr);
  if (with_wall) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r.wall_seconds);
    s += std::string(",") + buf;
  }
  return s;
}

struct MetricsLog {
  std::vector<MetricRow> rows;

  void write_csv(std::ostream& os, bool header = true) const {
    if (header) os << kMetricHeader << "\n";
    for (const auto& r : rows) os << format_row(r) << "\n";
  }

  /// Digest over every column except wall_seconds.
  std::string digest() const {
    Digest d;
    for (const auto& r : rows) d.update(format_row(r, false)).update("\n");
    return d.hex();
  }
};

struct EvalResult {
  double loss = 0;
  double top1_err = 0;
  std::optional<double> top5_err;
  std::size_t count = 0;
};

inline void require_classes(const NetworkSpec& spec, const Dataset& data) {
  if (spec.classes != std::size_t(data.classes) || spec.head.classes != std::size_t(data.classes)) {
    throw ValidationError("network '" + spec.name + "' predicts " + std::to_string(spec.head.classes) +
                          " classes, data has " + std::to_string(data.classes));
  }
}

/// Full pass without augmentation, normalization layers on running statistics.
template <typename T>
EvalResult evaluate(Network<T>& net, const Dataset& data, std::size_t batch = 250) {
  require_classes(net.spec(), data);
  if (data.size() == 0) throw ValidationError("evaluation set is empty");
  EvalResult r;
  r.count = data.size();
  const bool top5 = data.classes >= 100;
  std::size_t wrong5 = 0, wrong1 = 0;
  double loss = 0;
  std::vector<std::size_t> idx;
  for (std::size_t begin = 0; begin < data.size(); begin += batch) {
    const std::size_t end = std::min(data.size(), begin + batch);
    idx.resize(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    const auto labels = data.batch_labels(idx);
    const Tensor<T> logits = net.forward(data.batch<T>(idx), Phase::inference);
    const auto lr = softmax_cross_entropy(logits, labels);
    loss += double(lr.loss) * double(idx.size());
    wrong1 += lr.errors;
    if (top5) {
      const std::size_t classes = logits.dim(1);
      for (std::size_t n = 0; n < idx.size(); ++n) {
        const T* z = logits.raw() + n * classes;
        std::size_t above = 0;
        for (std::size_t k = 0; k < classes; ++k)
          if (z[k] > z[labels[n]]) ++above;
        if (above >= 5) ++wrong5;
      }
    }
  }
  r.loss = loss / double(data.size());
  if (!std::isfinite(r.loss)) throw NumericalError("evaluation loss is not finite");
  r.top1_err = double(wrong1) / double(data.size());
  if (top5) r.top5_err = double(wrong5) / double(data.size());
  return r;
}

template <typename T>
EvalResult evaluate_checkpoint(const Checkpoint& c, const Dataset& data, std::optional<UpdateMode> mode = {}) {
  Network<T> net(mode ? convert_mode(c.spec, *mode) : c.spec);
  restore(c, net);
  return evaluate(net, data);
}

struct EpochSummary {
  std::size_t epoch = 0;
  double train_loss = 0;  // mean batch loss over the epoch
  double train_err = 0;
  double test_err = std::numeric_limits<double>::quiet_NaN();
  std::optional<double> test_top5_err;
  double lr = 0;
};

struct TrainResult {
  std::vector<EpochSummary> epochs;
  MetricsLog log;
  bool diverged = false;
  std::string message;
  Checkpoint checkpoint;
};

/// Owns a network, its optimizer state and the step/epoch counters. Epoch e draws its
/// shuffle and augmentation from a stream derived from (seed, e), so a run resumed from
/// an epoch-boundary checkpoint continues exactly as the uninterrupted run.
template <typename T>
class Trainer {
 public:
  Trainer(NetworkSpec spec, TrainConfig cfg, Normalization norm)
      : net_(std::move(spec)), cfg_(std::move(cfg)), norm_(norm) {
    cfg_.validate();
    blas::use_deterministic_threads();
    net_.initialize(derive_seed(cfg_.seed, 0));
  }

  explicit Trainer(const Checkpoint& c) : net_(c.spec), cfg_(c.config), norm_(c.norm), epoch_(c.epoch), step_(c.step) {
    cfg_.validate();
    blas::use_deterministic_threads();
    restore(c, net_, &opt_);
  }

  Network<T>& network() { return net_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t epoch() const { return epoch_; }
  std::size_t step() const { return step_; }

  Checkpoint checkpoint() { return capture(net_, opt_, cfg_, epoch_, step_, norm_); }

  /// Called after every completed epoch.
  std::function<void(const EpochSummary&)> on_epoch;

  /// Trains from the current epoch up to `until_epoch` (default: the configured total).
  /// A test set, when given, is evaluated after every epoch.
  TrainResult run(const Dataset& train, const Dataset* test = nullptr, std::optional<std::size_t> until_epoch = {}) {
    require_classes(net_.spec(), train);
    if (test) require_classes(net_.spec(), *test);
    if (train.norm != norm_) throw ValidationError("training data normalization differs from the trainer's");
    if (train.size() == 0) throw ValidationError("training set is empty");
    const std::size_t last = std::min(until_epoch.value_or(cfg_.epochs), cfg_.epochs);
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult result;
    Checkpoint good = checkpoint();
    for (; epoch_ < last; ++epoch_) {
      Rng rng(derive_seed(cfg_.seed, 1 + epoch_));
      std::vector<std::size_t> order(train.size());
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      EpochSummary sum;
      sum.epoch = epoch_;
      sum.lr = cfg_.lr_at(epoch_);
      double loss_sum = 0;
      std::size_t errors = 0, steps = 0;
      for (std::size_t begin = 0; begin < order.size(); begin += cfg_.batch) {
        const std::size_t end = std::min(order.size(), begin + cfg_.batch);
        const std::span<const std::size_t> idx(order.data() + begin, end - begin);
        const Tensor<T> x = cfg_.augment ? augment(train.batch<T>(idx), rng) : train.batch<T>(idx);
        const auto labels = train.batch_labels(idx);
        net_.zero_grad();
        const Tensor<T> logits = net_.forward(x, Phase::training, true);
        const auto lr = softmax_cross_entropy(logits, labels);
        try {
          if (!std::isfinite(double(lr.loss))) {
            throw NumericalError("training loss is not finite at epoch " + std::to_string(epoch_) + ", step " +
                                 std::to_string(step_));
          }
          net_.backward(lr.grad);
          sgd_step(net_, opt_, cfg_, epoch_);
        } catch (const NumericalError& e) {
          result.diverged = true;
          result.message = e.what();
          good.status = "diverged";
          result.checkpoint = std::move(good);
          return result;
        }
        ++step_;
        ++steps;
        loss_sum += double(lr.loss);
        errors += lr.errors;
        MetricRow row;
        row.epoch = epoch_;
        row.step = step_;
        row.train_loss = double(lr.loss);
        row.train_err = double(lr.errors) / double(idx.size());
        row.lr = sum.lr;
        row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.rows.push_back(row);
      }
      sum.train_loss = loss_sum / double(steps);
      sum.train_err = double(errors) / double(train.size());
      if (test) {
        const EvalResult ev = evaluate(net_, *test);
        sum.test_err = ev.top1_err;
        sum.test_top5_err = ev.top5_err;
        result.log.rows.back().test_err = ev.top1_err;
      }
      result.epochs.push_back(sum);
      if (on_epoch) on_epoch(sum);
      good = capture(net_, opt_, cfg_, epoch_ + 1, step_, norm_);
    }
    result.checkpoint = std::move(good);
    return result;
  }

 private:
  Network<T> net_;
  TrainConfig cfg_;
  Normalization norm_;
  SgdState<T> opt_;
  std::size_t epoch_ = 0;
  std::size_t step_ = 0;
};

}  // namespace gunn::train
