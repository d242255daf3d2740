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

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gunn/arch/spec.hpp"

namespace gunn {

using Json = nlohmann::ordered_json;

namespace detail {

template <typename E>
E parse_enum(const std::string& text, std::initializer_list<std::pair<const char*, E>> table, const char* what) {
  for (const auto& [name, value] : table)
    if (text == name) return value;
  std::string options;
  for (const auto& [name, value] : table) options += (options.empty() ? "" : "|") + std::string(name);
  throw ValidationError(std::string(what) + " '" + text + "' is not one of " + options);
}

inline PoolKind parse_pool(const std::string& s) {
  return parse_enum<PoolKind>(s, {{"none", PoolKind::none}, {"avg", PoolKind::avg}, {"max", PoolKind::max}}, "pool");
}

inline UpdateMode parse_mode(const std::string& s) {
  return parse_enum<UpdateMode>(
      s, {{"gunn", UpdateMode::gradual}, {"gradual", UpdateMode::gradual}, {"sunn", UpdateMode::simultaneous},
          {"simultaneous", UpdateMode::simultaneous}},
      "mode");
}

inline ShortcutKind parse_shortcut(const std::string& s) {
  return parse_enum<ShortcutKind>(
      s, {{"identity", ShortcutKind::identity}, {"projection", ShortcutKind::projection}, {"none", ShortcutKind::none}},
      "shortcut");
}

template <typename V>
V field(const Json& j, const char* key, const char* where) {
  if (!j.contains(key)) throw ValidationError(std::string(where) + " is missing '" + key + "'");
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(std::string(where) + " field '" + key + "' has the wrong type");
  }
}

template <typename V>
V field_or(const Json& j, const char* key, V fallback, const char* where) {
  return j.contains(key) ? field<V>(j, key, where) : fallback;
}

}  // namespace detail

using detail::parse_mode;
using detail::parse_pool;
using detail::parse_shortcut;

inline Json to_json(const NetworkSpec& s) {
  Json j;
  j["name"] = s.name;
  j["classes"] = s.classes;
  j["input_channels"] = s.input_channels;
  j["input_size"] = s.input_size;
  j["conv_bias"] = s.conv_bias;
  j["stem"] = {{"kernel", s.stem.kernel},
               {"out", s.stem.out},
               {"stride", s.stem.stride},
               {"expand_to", s.stem.expand_to},
               {"pool", to_string(s.stem.pool)}};
  Json stages = Json::array();
  for (const auto& st : s.stages) {
    if (const auto* g = std::get_if<GunnStageSpec>(&st)) {
      stages.push_back({{"type", "gunn"},
                        {"N", g->layer.N},
                        {"P", g->layer.P},
                        {"K", g->layer.K},
                        {"M", g->layer.M},
                        {"mode", to_string(g->mode)},
                        {"shortcut", to_string(g->shortcut)}});
    } else {
      const auto& t = std::get<TransitionSpec>(st);
      stages.push_back({{"type", "transition"}, {"out", t.out}, {"pool", to_string(t.pool)}});
    }
  }
  j["stages"] = std::move(stages);
  j["head"] = {{"features", s.head.features}, {"classes", s.head.classes}};
  return j;
}

inline NetworkSpec spec_from_json(const Json& j) {
  using detail::field;
  using detail::field_or;
  if (!j.is_object()) throw ValidationError("network config must be an object");
  NetworkSpec s;
  s.name = field_or<std::string>(j, "name", "network", "config");
  s.classes = field<std::size_t>(j, "classes", "config");
  s.input_channels = field_or<std::size_t>(j, "input_channels", 3, "config");
  s.input_size = field_or<std::size_t>(j, "input_size", 32, "config");
  s.conv_bias = field_or<bool>(j, "conv_bias", false, "config");

  const Json stem = field<Json>(j, "stem", "config");
  s.stem.kernel = field<std::size_t>(stem, "kernel", "stem");
  s.stem.out = field<std::size_t>(stem, "out", "stem");
  s.stem.stride = field_or<std::size_t>(stem, "stride", 1, "stem");
  s.stem.expand_to = field_or<std::size_t>(stem, "expand_to", 0, "stem");
  s.stem.pool = detail::parse_pool(field_or<std::string>(stem, "pool", "none", "stem"));

  const Json stages = field<Json>(j, "stages", "config");
  if (!stages.is_array()) throw ValidationError("config field 'stages' must be a list");
  for (const auto& st : stages) {
    const auto type = field<std::string>(st, "type", "stage");
    if (type == "gunn") {
      GunnStageSpec g;
      g.layer = {field<std::size_t>(st, "N", "gunn stage"), field<std::size_t>(st, "P", "gunn stage"),
                 field_or<std::size_t>(st, "K", 1, "gunn stage"), field_or<std::size_t>(st, "M", 1, "gunn stage")};
      g.mode = detail::parse_mode(field_or<std::string>(st, "mode", "gunn", "gunn stage"));
      g.shortcut = detail::parse_shortcut(field_or<std::string>(st, "shortcut", "identity", "gunn stage"));
      s.stages.emplace_back(g);
    } else if (type == "transition") {
      s.stages.emplace_back(TransitionSpec{field<std::size_t>(st, "out", "transition"),
                                           detail::parse_pool(field_or<std::string>(st, "pool", "avg", "transition"))});
    } else {
      throw ValidationError("stage type '" + type + "' is not gunn|transition");
    }
  }
  const Json head = field<Json>(j, "head", "config");
  s.head = {field<std::size_t>(head, "features", "head"), field_or<std::size_t>(head, "classes", s.classes, "head")};
  s.validate();
  return s;
}

inline NetworkSpec parse_spec(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return spec_from_json(j);
}

inline NetworkSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_spec(ss.str());
}

inline void save_spec(const NetworkSpec& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write config '" + path + "'");
  out << to_json(s).dump(2) << "\n";
}

}  // namespace gunn
