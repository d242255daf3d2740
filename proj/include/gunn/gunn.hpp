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

#include "gunn/core/digest.hpp"
#include "gunn/core/error.hpp"
#include "gunn/core/rng.hpp"
#include "gunn/core/serialize.hpp"
#include "gunn/core/tensor.hpp"
#include "gunn/version.hpp"
#include "gunn/engine/gunn_layer.hpp"
#include "gunn/engine/memory.hpp"
#include "gunn/engine/partition.hpp"
#include "gunn/engine/reference.hpp"
#include "gunn/engine/update_unit.hpp"
#include "gunn/ops/activation.hpp"
#include "gunn/ops/batchnorm.hpp"
#include "gunn/ops/conv.hpp"
#include "gunn/ops/linear.hpp"
#include "gunn/ops/param.hpp"
#include "gunn/ops/pool.hpp"
#include "gunn/arch/config_io.hpp"
#include "gunn/arch/network.hpp"
#include "gunn/arch/spec.hpp"
#include "gunn/lab/collapse.hpp"
#include "gunn/lab/linear_model.hpp"
#include "gunn/lab/network_collapse.hpp"
#include "gunn/train/augment.hpp"
#include "gunn/train/checkpoint.hpp"
#include "gunn/train/cifar.hpp"
#include "gunn/train/config.hpp"
#include "gunn/train/sgd.hpp"
#include "gunn/train/surrogate.hpp"
#include "gunn/train/trainer.hpp"
