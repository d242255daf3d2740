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

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gunn/arch/config_io.hpp"
#include "gunn/arch/network.hpp"
#include "gunn/core/serialize.hpp"
#include "gunn/train/cifar.hpp"
#include "gunn/train/config.hpp"
#include "gunn/train/sgd.hpp"

namespace gunn::train {

// Checkpoint layout (little-endian):
//   "GCKP" | u32 version | u64 manifest length | manifest JSON
//   then per record: u32 name length | name | tensor record
// The manifest holds the network config, training config, counters, normalization
// constants and the record names in file order.

inline constexpr std::array<char, 4> kCheckpointMagic{'G', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkSpec spec;
  TrainConfig config;
  std::size_t epoch = 0;  // completed epochs
  std::size_t step = 0;   // completed optimizer steps
  Normalization norm;
  std::string status = "ok";
  std::vector<std::pair<std::string, Tensor<double>>> records;

  const Tensor<double>* find(const std::string& name) const {
    for (const auto& [n, t] : records)
      if (n == name) return &t;
    return nullptr;
  }
};

template <typename T>
Tensor<double> as_double(const Tensor<T>& t) {
  return t.template cast<double>();
}

template <typename T>
Tensor<double> vector_record(const std::vector<T>& v) {
  Tensor<double> t({v.size()});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = double(v[i]);
  return t;
}

/// Snapshot of parameters, running statistics and momentum buffers.
template <typename T>
Checkpoint capture(Network<T>& net, const SgdState<T>& opt, const TrainConfig& cfg, std::size_t epoch,
                   std::size_t step, const Normalization& norm) {
  Checkpoint c{net.spec(), cfg, epoch, step, norm, "ok", {}};
  net.for_each_param("", [&](const std::string& name, Param<T>& p) {
    c.records.emplace_back("param/" + name, as_double(p.value));
  });
  net.for_each_batchnorm("", [&](const std::string& name, BatchNormParams<T>& bn) {
    c.records.emplace_back("bn/" + name + ".running_mean", vector_record(bn.running_mean));
    c.records.emplace_back("bn/" + name + ".running_var", vector_record(bn.running_var));
  });
  net.for_each_param("", [&](const std::string& name, Param<T>& p) {
    auto it = opt.velocity.find(name);
    c.records.emplace_back("velocity/" + name,
                           it == opt.velocity.end() ? Tensor<double>(p.value.shape()) : as_double(it->second));
  });
  return c;
}

namespace detail {

inline const Tensor<double>& require_record(const Checkpoint& c, const std::string& name, const Shape& shape) {
  const Tensor<double>* t = c.find(name);
  if (!t) throw FormatError("checkpoint lacks record " + name);
  if (t->shape() != shape) {
    throw FormatError("checkpoint record " + name + " has shape " + gunn::to_string(t->shape()) + ", expected " +
                      gunn::to_string(shape));
  }
  return *t;
}

}  // namespace detail

/// Loads a checkpoint's state into a network built from a structurally identical spec.
/// Update modes may differ; they do not affect the stored tensors.
template <typename T>
void restore(const Checkpoint& c, Network<T>& net, SgdState<T>* opt = nullptr) {
  if (convert_mode(c.spec, UpdateMode::gradual) != convert_mode(net.spec(), UpdateMode::gradual)) {
    throw ValidationError("checkpoint network '" + c.spec.name + "' does not match '" + net.spec().name + "'");
  }
  net.for_each_param("", [&](const std::string& name, Param<T>& p) {
    p.value = detail::require_record(c, "param/" + name, p.value.shape()).template cast<T>();
    p.zero_grad();
  });
  net.for_each_batchnorm("", [&](const std::string& name, BatchNormParams<T>& bn) {
    const Shape s{bn.channels()};
    const auto& m = detail::require_record(c, "bn/" + name + ".running_mean", s);
    const auto& v = detail::require_record(c, "bn/" + name + ".running_var", s);
    for (std::size_t i = 0; i < bn.channels(); ++i) {
      bn.running_mean[i] = static_cast<T>(m[i]);
      bn.running_var[i] = static_cast<T>(v[i]);
    }
  });
  if (opt) {
    opt->velocity.clear();
    net.for_each_param("", [&](const std::string& name, Param<T>& p) {
      opt->velocity[name] = detail::require_record(c, "velocity/" + name, p.value.shape()).template cast<T>();
    });
  }
}

inline Json manifest(const Checkpoint& c) {
  Json j;
  j["format"] = "gunn-checkpoint";
  j["network"] = to_json(c.spec);
  j["train"] = to_json(c.config);
  j["epoch"] = c.epoch;
  j["step"] = c.step;
  j["status"] = c.status;
  j["normalization"] = {{"mean", c.norm.mean}, {"stddev", c.norm.stddev}};
  Json names = Json::array();
  for (const auto& r : c.records) names.push_back(r.first);
  j["records"] = names;
  return j;
}

inline void write_checkpoint(std::ostream& os, const Checkpoint& c) {
  const std::string text = manifest(c).dump();
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  gunn::detail::write_pod<std::uint32_t>(os, kCheckpointVersion);
  gunn::detail::write_pod<std::uint64_t>(os, text.size());
  os.write(text.data(), std::streamsize(text.size()));
  for (const auto& [name, t] : c.records) {
    gunn::detail::write_pod<std::uint32_t>(os, std::uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    write_tensor(os, t);
  }
  if (!os) throw FormatError("failed writing checkpoint");
}

inline Checkpoint read_checkpoint(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kCheckpointMagic) throw FormatError("not a checkpoint (bad magic)");
  const auto version = gunn::detail::read_pod<std::uint32_t>(is, "checkpoint version");
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto len = gunn::detail::read_pod<std::uint64_t>(is, "manifest length");
  if (len > (1u << 26)) throw FormatError("implausible manifest length " + std::to_string(len));
  std::string text(len, '\0');
  if (!is.read(text.data(), std::streamsize(len))) throw FormatError("truncated checkpoint manifest");
  Checkpoint c;
  std::vector<std::string> names;
  try {
    const Json j = Json::parse(text);
    if (j.at("format") != "gunn-checkpoint") throw FormatError("manifest format is not gunn-checkpoint");
    c.spec = spec_from_json(j.at("network"));
    c.config = train_config_from_json(j.at("train"));
    c.epoch = j.at("epoch").get<std::size_t>();
    c.step = j.at("step").get<std::size_t>();
    c.status = j.at("status").get<std::string>();
    c.norm.mean = j.at("normalization").at("mean").get<std::array<double, 3>>();
    c.norm.stddev = j.at("normalization").at("stddev").get<std::array<double, 3>>();
    names = j.at("records").get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  for (const auto& expected : names) {
    const auto n = gunn::detail::read_pod<std::uint32_t>(is, "record name length");
    std::string name(n, '\0');
    if (!is.read(name.data(), n)) throw FormatError("truncated record name");
    if (name != expected) throw FormatError("record '" + name + "' out of manifest order, expected '" + expected + "'");
    c.records.emplace_back(std::move(name), read_tensor<double>(is));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after the last checkpoint record");
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  write_checkpoint(os, c);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return read_checkpoint(is);
}

/// Same checkpoint with every gunn stage switched to `mode`; tensors are untouched.
inline Checkpoint convert_checkpoint(Checkpoint c, UpdateMode mode) {
  c.spec = convert_mode(std::move(c.spec), mode);
  return c;
}

}  // namespace gunn::train
