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
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gunn/core/error.hpp"

namespace gunn {

using Shape = std::vector<std::size_t>;

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

inline std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

/// Dense row-major array. Feature maps use [batch, channel, height, width].
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
    validate_dims();
    data_.assign(element_count(shape_), fill);
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_dims();
    if (element_count(shape_) != data_.size()) {
      throw ShapeError("tensor shape " + gunn::to_string(shape_) + " holds " +
                       std::to_string(element_count(shape_)) + " elements but " +
                       std::to_string(data_.size()) + " were supplied");
    }
  }

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }

  // Feature-map accessors; only meaningful for rank-4 tensors.
  std::size_t batch() const { return dim(0); }
  std::size_t channels() const { return dim(1); }
  std::size_t height() const { return dim(2); }
  std::size_t width() const { return dim(3); }
  std::size_t plane() const { return dim(2) * dim(3); }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  T* raw() noexcept { return data_.data(); }
  const T* raw() const noexcept { return data_.data(); }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Contiguous [height*width] slice of one channel of one sample.
  std::span<T> channel(std::size_t n, std::size_t c) {
    return std::span<T>(data_).subspan((n * shape_[1] + c) * plane(), plane());
  }
  std::span<const T> channel(std::size_t n, std::size_t c) const {
    return std::span<const T>(data_).subspan((n * shape_[1] + c) * plane(), plane());
  }

  void reshape(Shape shape) {
    if (element_count(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + gunn::to_string(shape_) + " to " + gunn::to_string(shape));
    }
    shape_ = std::move(shape);
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(*this, other, "operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  Tensor& operator-=(const Tensor& other) {
    require_same_shape(*this, other, "operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
  }

  Tensor& operator*=(T s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape_);
    std::transform(data_.begin(), data_.end(), out.data().begin(), [](T v) { return static_cast<U>(v); });
    return out;
  }

  static void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape_ != b.shape_) {
      throw ShapeError(std::string(what) + ": shape mismatch " + gunn::to_string(a.shape_) + " vs " +
                       gunn::to_string(b.shape_));
    }
  }

 private:
  void validate_dims() const {
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + gunn::to_string(shape_));
    }
  }

  Shape shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
  a += b;
  return a;
}

template <typename T>
Tensor<T> operator-(Tensor<T> a, const Tensor<T>& b) {
  a -= b;
  return a;
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + " tensor, got " +
                     to_string(t.shape()));
  }
}

template <typename T>
T max_abs(const Tensor<T>& t) {
  T m{0};
  for (T v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

template <typename T>
T max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  Tensor<T>::require_same_shape(a, b, "max_abs_diff");
  T m{0};
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
bool all_finite(std::span<const T> values) {
  return std::all_of(values.begin(), values.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return all_finite(t.data());
}

// Channel gather/scatter over an explicit index list. Feature maps only.

template <typename T>
Tensor<T> gather_channels(const Tensor<T>& src, std::span<const std::size_t> channels) {
  require_rank(src, 4, "gather_channels");
  Tensor<T> out({src.batch(), channels.size(), src.height(), src.width()});
  for (std::size_t n = 0; n < src.batch(); ++n) {
    for (std::size_t k = 0; k < channels.size(); ++k) {
      auto from = src.channel(n, channels[k]);
      std::copy(from.begin(), from.end(), out.channel(n, k).begin());
    }
  }
  return out;
}

template <typename T>
void scatter_channels(Tensor<T>& dst, std::span<const std::size_t> channels, const Tensor<T>& src) {
  require_rank(src, 4, "scatter_channels");
  if (src.batch() != dst.batch() || src.channels() != channels.size() || src.plane() != dst.plane()) {
    throw ShapeError("scatter_channels: source " + to_string(src.shape()) + " does not fit " +
                     std::to_string(channels.size()) + " channels of " + to_string(dst.shape()));
  }
  for (std::size_t n = 0; n < dst.batch(); ++n) {
    for (std::size_t k = 0; k < channels.size(); ++k) {
      auto from = src.channel(n, k);
      std::copy(from.begin(), from.end(), dst.channel(n, channels[k]).begin());
    }
  }
}

template <typename T>
void add_channels(Tensor<T>& dst, std::span<const std::size_t> channels, const Tensor<T>& src) {
  if (src.batch() != dst.batch() || src.channels() != channels.size() || src.plane() != dst.plane()) {
    throw ShapeError("add_channels: source " + to_string(src.shape()) + " does not fit " +
                     std::to_string(channels.size()) + " channels of " + to_string(dst.shape()));
  }
  for (std::size_t n = 0; n < dst.batch(); ++n) {
    for (std::size_t k = 0; k < channels.size(); ++k) {
      auto from = src.channel(n, k);
      auto to = dst.channel(n, channels[k]);
      for (std::size_t i = 0; i < from.size(); ++i) to[i] += from[i];
    }
  }
}

}  // namespace gunn
