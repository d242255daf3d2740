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
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "gunn/core/tensor.hpp"

namespace gunn {

// Tensor record layout (all little-endian):
//   "GTNS" | u32 version | u32 rank | u64 dims[rank] | f64 data[prod(dims)]
// Elements are always stored as float64 so float and double models share one
// on-disk form; float -> double -> float round-trips exactly.

inline constexpr std::array<char, 4> kTensorMagic{'G', 'T', 'N', 'S'};
inline constexpr std::uint32_t kTensorVersion = 1;

static_assert(std::endian::native == std::endian::little, "serialization assumes a little-endian host");

namespace detail {

template <typename U>
void write_pod(std::ostream& os, U value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(U));
}

template <typename U>
U read_pod(std::istream& is, const char* what) {
  U value{};
  if (!is.read(reinterpret_cast<char*>(&value), sizeof(U))) {
    throw FormatError(std::string("truncated record while reading ") + what);
  }
  return value;
}

}  // namespace detail

template <typename T>
void write_tensor(std::ostream& os, const Tensor<T>& t) {
  os.write(kTensorMagic.data(), kTensorMagic.size());
  detail::write_pod<std::uint32_t>(os, kTensorVersion);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) detail::write_pod<std::uint64_t>(os, d);
  for (T v : t.data()) detail::write_pod<double>(os, static_cast<double>(v));
  if (!os) throw FormatError("failed writing tensor record");
}

template <typename T>
Tensor<T> read_tensor(std::istream& is) {
  std::array<char, 4> magic{};
  if (!is.read(magic.data(), magic.size())) throw FormatError("truncated record while reading tensor magic");
  if (magic != kTensorMagic) throw FormatError("bad tensor magic, expected GTNS");
  const auto version = detail::read_pod<std::uint32_t>(is, "tensor version");
  if (version != kTensorVersion) throw FormatError("unsupported tensor version " + std::to_string(version));
  const auto rank = detail::read_pod<std::uint32_t>(is, "tensor rank");
  if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<std::size_t>(detail::read_pod<std::uint64_t>(is, "tensor dims"));
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(detail::read_pod<double>(is, "tensor data"));
  return t;
}

}  // namespace gunn
