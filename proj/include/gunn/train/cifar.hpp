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
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gunn/core/error.hpp"
#include "gunn/core/rng.hpp"
#include "gunn/core/tensor.hpp"

namespace gunn::train {

namespace fs = std::filesystem;

inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageBytes = kImageChannels * kImageSide * kImageSide;

enum class Split { train, test };

inline std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct DatasetSource {
  fs::path root;
  Split split = Split::train;
  std::optional<std::size_t> subset_size;
  int classes = 10;
  std::uint64_t seed = 0;
};

/// Decoded records before normalization: bytes laid out [image][channel][row][col].
struct RawImages {
  std::vector<std::uint8_t> pixels;
  std::vector<int> labels;
  int classes = 10;

  std::size_t size() const { return labels.size(); }
};

inline std::size_t label_bytes(int classes) {
  if (classes == 10) return 1;
  if (classes == 100) return 2;
  throw ValidationError("CIFAR class count must be 10 or 100, got " + std::to_string(classes));
}

/// Parses records of one CIFAR binary file. CIFAR-100 records carry a coarse then a fine
/// label byte; the fine label is used.
inline RawImages parse_cifar_bytes(std::span<const std::uint8_t> bytes, int classes, const std::string& name) {
  const std::size_t lb = label_bytes(classes);
  const std::size_t record = lb + kImageBytes;
  if (bytes.empty()) throw FormatError("cifar: " + name + " contains no records");
  if (bytes.size() % record != 0) {
    const std::size_t whole = bytes.size() / record;
    throw FormatError("cifar: " + name + " has " + std::to_string(bytes.size()) + " bytes, not a multiple of the " +
                      std::to_string(record) + "-byte record; record " + std::to_string(whole) +
                      " at byte offset " + std::to_string(whole * record) + " is truncated (" +
                      std::to_string(bytes.size() - whole * record) + " bytes)");
  }
  RawImages out;
  out.classes = classes;
  const std::size_t count = bytes.size() / record;
  out.pixels.resize(count * kImageBytes);
  out.labels.resize(count);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t off = r * record;
    const int label = bytes[off + lb - 1];
    if (label >= classes) {
      throw FormatError("cifar: " + name + " record " + std::to_string(r) + " at byte offset " +
                        std::to_string(off + lb - 1) + " has label " + std::to_string(label) + ", expected < " +
                        std::to_string(classes));
    }
    out.labels[r] = label;
    std::copy_n(bytes.begin() + std::ptrdiff_t(off + lb), kImageBytes, out.pixels.begin() + std::ptrdiff_t(r * kImageBytes));
  }
  return out;
}

inline RawImages parse_cifar_file(const fs::path& path, int classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cifar: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_cifar_bytes(bytes, classes, path.string());
}

/// Binary files for a split, looked up in `root` and in the archive's default subdirectory.
inline std::vector<fs::path> cifar_files(const fs::path& root, Split split, int classes) {
  label_bytes(classes);
  std::vector<std::string> names;
  fs::path sub;
  if (classes == 10) {
    sub = "cifar-10-batches-bin";
    if (split == Split::train) {
      for (int i = 1; i <= 5; ++i) names.push_back("data_batch_" + std::to_string(i) + ".bin");
    } else {
      names.push_back("test_batch.bin");
    }
  } else {
    sub = "cifar-100-binary";
    names.push_back(split == Split::train ? "train.bin" : "test.bin");
  }
  for (const fs::path& dir : {root, root / sub}) {
    std::vector<fs::path> found;
    for (const auto& n : names)
      if (fs::exists(dir / n)) found.push_back(dir / n);
    if (found.size() == names.size()) return found;
  }
  throw ValidationError("cifar: " + to_string(split) + " files (" + names.front() + (names.size() > 1 ? " ..." : "") +
                        ") not found under " + root.string());
}

/// Keeps `count` records chosen by a seeded shuffle, in their original order.
inline RawImages take_subset(const RawImages& all, std::size_t count, std::uint64_t seed) {
  if (count > all.size()) {
    throw ValidationError("subset of " + std::to_string(count) + " requested from " + std::to_string(all.size()) +
                          " records");
  }
  std::vector<std::size_t> idx(all.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, 0x5B5E7));
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  RawImages out;
  out.classes = all.classes;
  out.pixels.resize(count * kImageBytes);
  for (std::size_t k = 0; k < count; ++k) {
    out.labels.push_back(all.labels[idx[k]]);
    std::copy_n(all.pixels.begin() + std::ptrdiff_t(idx[k] * kImageBytes), kImageBytes,
                out.pixels.begin() + std::ptrdiff_t(k * kImageBytes));
  }
  return out;
}

inline RawImages load_cifar(const DatasetSource& src) {
  RawImages all;
  all.classes = src.classes;
  for (const auto& f : cifar_files(src.root, src.split, src.classes)) {
    RawImages part = parse_cifar_file(f, src.classes);
    all.pixels.insert(all.pixels.end(), part.pixels.begin(), part.pixels.end());
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
  }
  if (src.subset_size) return take_subset(all, *src.subset_size, src.seed);
  return all;
}

/// Per-channel mean and standard deviation of pixel values scaled to [0, 1].
struct Normalization {
  std::array<double, 3> mean{0, 0, 0};
  std::array<double, 3> stddev{1, 1, 1};

  static Normalization from(const RawImages& raw) {
    if (raw.size() == 0) throw ValidationError("normalization needs at least one image");
    Normalization n;
    const std::size_t plane = kImageSide * kImageSide;
    const double count = double(raw.size() * plane);
    for (std::size_t c = 0; c < kImageChannels; ++c) {
      double sum = 0, sq = 0;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        const std::uint8_t* p = raw.pixels.data() + i * kImageBytes + c * plane;
        for (std::size_t k = 0; k < plane; ++k) {
          const double v = p[k] / 255.0;
          sum += v;
          sq += v * v;
        }
      }
      n.mean[c] = sum / count;
      const double var = std::max(0.0, sq / count - n.mean[c] * n.mean[c]);
      if (var <= 0) throw ValidationError("channel " + std::to_string(c) + " has zero variance");
      n.stddev[c] = std::sqrt(var);
    }
    return n;
  }

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

/// Normalized images stored as float [count][3][32][32].
struct Dataset {
  std::vector<float> images;
  std::vector<int> labels;
  int classes = 10;
  Normalization norm;

  std::size_t size() const { return labels.size(); }

  template <typename T>
  Tensor<T> batch(std::span<const std::size_t> indices) const {
    Tensor<T> out({indices.size(), kImageChannels, kImageSide, kImageSide});
    for (std::size_t k = 0; k < indices.size(); ++k) {
      const float* src = images.data() + indices[k] * kImageBytes;
      std::transform(src, src + kImageBytes, out.raw() + k * kImageBytes, [](float v) { return static_cast<T>(v); });
    }
    return out;
  }

  std::vector<int> batch_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out;
    out.reserve(indices.size());
    for (auto i : indices) out.push_back(labels[i]);
    return out;
  }
};

inline Dataset normalize(const RawImages& raw, const Normalization& norm) {
  Dataset d;
  d.labels = raw.labels;
  d.classes = raw.classes;
  d.norm = norm;
  d.images.resize(raw.pixels.size());
  const std::size_t plane = kImageSide * kImageSide;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t c = 0; c < kImageChannels; ++c) {
      const std::size_t off = i * kImageBytes + c * plane;
      const double m = norm.mean[c], s = norm.stddev[c];
      for (std::size_t k = 0; k < plane; ++k) d.images[off + k] = float((raw.pixels[off + k] / 255.0 - m) / s);
    }
  }
  return d;
}

struct SplitPair {
  Dataset train;
  Dataset test;
};

/// Loads both splits; normalization constants come from the (possibly subset) training split.
inline SplitPair load_splits(const fs::path& root, int classes, std::optional<std::size_t> train_subset,
                             std::optional<std::size_t> test_subset, std::uint64_t seed) {
  const RawImages train = load_cifar({root, Split::train, train_subset, classes, seed});
  const RawImages test = load_cifar({root, Split::test, test_subset, classes, seed});
  const Normalization norm = Normalization::from(train);
  return {normalize(train, norm), normalize(test, norm)};
}

}  // namespace gunn::train
