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
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <vector>

#include "gunn/core/rng.hpp"
#include "gunn/train/cifar.hpp"

namespace gunn::train {

/// Synthetic stand-in for CIFAR-10 written in the CIFAR binary layout. Each image shows
/// one of ten filled or outlined shapes (the label) with random colour, size, position and
/// tilt, drawn over a two-colour gradient with smaller distractor shapes and pixel noise.
struct SurrogateOptions {
  std::size_t train_count = 5000;
  std::size_t test_count = 1000;
  std::uint64_t seed = 2026;
  double clutter = 1.0;  // expected distractors per image is 1.5 * clutter
  double noise = 20.0;   // pixel noise standard deviation in 0..255 units
};

namespace detail {

// Membership test in the shape's own frame (u, v) at size r.
inline bool in_shape(int cls, double u, double v, double r) {
  const double au = std::abs(u), av = std::abs(v), d = std::hypot(u, v), box = std::max(au, av);
  switch (cls) {
    case 0:
      return d < r;
    case 1:
      return d < r && d > 0.6 * r;
    case 2:
      return box < r;
    case 3:
      return box < r && box > 0.6 * r;
    case 4:
      return av < r && au < (v + r) * 0.5;
    case 5:
      return (au < 0.3 * r && av < r) || (av < 0.3 * r && au < r);
    case 6:
      return au < r && (std::abs(v - 0.6 * r) < 0.25 * r || std::abs(v + 0.6 * r) < 0.25 * r);
    case 7:
      return std::abs(u - v) < 0.35 * r && au < r;
    case 8:
      return (std::abs(u - v) < 0.3 * r || std::abs(u + v) < 0.3 * r) && au < r;
    case 9:
      return u * u / (r * r) + v * v / (0.25 * r * r) < 1;
  }
  return false;
}

inline RawImages surrogate_split(const SurrogateOptions& o, std::size_t count, Rng& rng) {
  constexpr std::size_t plane = kImageSide * kImageSide;
  constexpr double side = double(kImageSide);
  std::uniform_real_distribution<double> u01(0, 1);
  std::uniform_int_distribution<int> cls(0, 9);
  std::normal_distribution<double> noise(0, o.noise);
  RawImages out;
  out.classes = 10;
  out.pixels.resize(count * kImageBytes);
  std::vector<double> img(kImageBytes);
  auto colour = [&] { return std::array<double, 3>{255 * u01(rng), 255 * u01(rng), 255 * u01(rng)}; };
  auto draw = [&](int c, double cx, double cy, double r, double tilt, const std::array<double, 3>& col) {
    const double cs = std::cos(tilt), sn = std::sin(tilt);
    for (std::size_t y = 0; y < kImageSide; ++y) {
      for (std::size_t x = 0; x < kImageSide; ++x) {
        const double dx = double(x) - cx, dy = double(y) - cy;
        if (!in_shape(c, cs * dx + sn * dy, cs * dy - sn * dx, r)) continue;
        for (std::size_t k = 0; k < kImageChannels; ++k) img[k * plane + y * kImageSide + x] = col[k];
      }
    }
  };
  for (std::size_t i = 0; i < count; ++i) {
    const int c = cls(rng);
    const auto c0 = colour(), c1 = colour();
    const double angle = 2 * std::numbers::pi * u01(rng);
    for (std::size_t y = 0; y < kImageSide; ++y) {
      for (std::size_t x = 0; x < kImageSide; ++x) {
        const double t = 0.5 + 0.25 * (std::sin(angle) * (double(x) - 16) + std::cos(angle) * (double(y) - 16)) / 16;
        for (std::size_t k = 0; k < kImageChannels; ++k) img[k * plane + y * kImageSide + x] = c0[k] * (1 - t) + c1[k] * t;
      }
    }
    const int distractors = int(o.clutter * u01(rng) * 3);
    for (int k = 0; k < distractors; ++k) {
      const auto col = colour();
      const int dc = cls(rng);
      const double cx = side * u01(rng), cy = side * u01(rng), r = 2 + 3 * u01(rng);
      draw(dc, cx, cy, r, 2 * std::numbers::pi * u01(rng), col);
    }
    const auto col = colour();
    const double cx = 10 + 12 * u01(rng), cy = 10 + 12 * u01(rng), r = 5 + 5 * u01(rng);
    draw(c, cx, cy, r, 0.6 * (u01(rng) - 0.5), col);
    for (std::size_t k = 0; k < kImageBytes; ++k) {
      out.pixels[i * kImageBytes + k] = std::uint8_t(std::clamp(std::lround(img[k] + noise(rng)), 0L, 255L));
    }
    out.labels.push_back(c);
  }
  return out;
}

inline void write_records(const fs::path& path, const RawImages& raw, std::size_t begin, std::size_t end) {
  const std::size_t lb = label_bytes(raw.classes);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  for (std::size_t i = begin; i < end; ++i) {
    if (lb == 2) os.put(char(raw.labels[i] / 20));
    os.put(char(raw.labels[i]));
    os.write(reinterpret_cast<const char*>(raw.pixels.data() + i * kImageBytes), std::streamsize(kImageBytes));
  }
  if (!os) throw FormatError("failed writing " + path.string());
}

}  // namespace detail

inline void write_cifar_files(const fs::path& dir, const RawImages& raw, Split split) {
  fs::create_directories(dir);
  if (raw.classes == 100) {
    detail::write_records(dir / (split == Split::train ? "train.bin" : "test.bin"), raw, 0, raw.size());
  } else if (split == Split::test) {
    detail::write_records(dir / "test_batch.bin", raw, 0, raw.size());
  } else {
    const std::size_t per = (raw.size() + 4) / 5;
    for (std::size_t k = 0; k < 5; ++k) {
      const std::size_t b = std::min(raw.size(), k * per), e = std::min(raw.size(), (k + 1) * per);
      detail::write_records(dir / ("data_batch_" + std::to_string(k + 1) + ".bin"), raw, b, e);
    }
  }
}

/// Writes both splits under `dir`; the same options always produce the same bytes.
inline void generate_surrogate(const fs::path& dir, const SurrogateOptions& o) {
  if (o.train_count < 5 || o.test_count == 0) throw ValidationError("surrogate needs at least 5 train and 1 test image");
  if (o.clutter < 0 || o.noise < 0) throw ValidationError("surrogate clutter and noise must be non-negative");
  Rng train_rng(derive_seed(o.seed, 1)), test_rng(derive_seed(o.seed, 2));
  write_cifar_files(dir, detail::surrogate_split(o, o.train_count, train_rng), Split::train);
  write_cifar_files(dir, detail::surrogate_split(o, o.test_count, test_rng), Split::test);
}

}  // namespace gunn::train
