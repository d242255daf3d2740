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

#include <cstdint>
#include <string>
#include <vector>

#include "gunn/arch/config_io.hpp"
#include "gunn/core/error.hpp"

namespace gunn::train {

enum class Precision { f32, f64 };

inline std::string to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

inline Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::f32;
  if (s == "f64") return Precision::f64;
  throw ValidationError("precision '" + s + "' is not f32|f64");
}

struct TrainConfig {
  double lr0 = 0.1;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  std::size_t epochs = 300;
  std::vector<std::size_t> milestones{150, 225};
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  bool augment = true;

  /// Desk-scale schedule: 20 epochs, steps at 10 and 15.
  static TrainConfig desk() {
    TrainConfig c;
    c.epochs = 20;
    c.milestones = {10, 15};
    return c;
  }

  void validate() const {
    if (!(lr0 > 0)) throw ValidationError("lr0 must be positive");
    if (weight_decay < 0) throw ValidationError("weight_decay must be non-negative");
    if (momentum < 0 || momentum >= 1) throw ValidationError("momentum must lie in [0, 1)");
    if (epochs == 0) throw ValidationError("epochs must be positive");
    if (batch == 0) throw ValidationError("batch must be positive");
    for (std::size_t i = 0; i < milestones.size(); ++i) {
      if (i > 0 && milestones[i] <= milestones[i - 1]) throw ValidationError("milestones must be strictly increasing");
      if (milestones[i] >= epochs) {
        throw ValidationError("milestone " + std::to_string(milestones[i]) + " is not below epochs=" +
                              std::to_string(epochs));
      }
    }
  }

  /// lr0 divided by 10 for every milestone at or before `epoch` (0-based).
  double lr_at(std::size_t epoch) const {
    double lr = lr0;
    for (auto m : milestones)
      if (epoch >= m) lr *= 0.1;
    return lr;
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline Json to_json(const TrainConfig& c) {
  Json j;
  j["lr0"] = c.lr0;
  j["weight_decay"] = c.weight_decay;
  j["momentum"] = c.momentum;
  j["epochs"] = c.epochs;
  j["milestones"] = c.milestones;
  j["batch"] = c.batch;
  j["seed"] = c.seed;
  j["precision"] = to_string(c.precision);
  j["augment"] = c.augment;
  return j;
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  try {
    c.lr0 = j.value("lr0", c.lr0);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    if (j.contains("milestones")) c.milestones = j.at("milestones").get<std::vector<std::size_t>>();
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
    c.augment = j.value("augment", c.augment);
    if (j.contains("precision")) c.precision = parse_precision(j.at("precision").get<std::string>());
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace gunn::train
