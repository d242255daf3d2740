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

#include <span>
#include <string>
#include <vector>

#include "gunn/core/error.hpp"

namespace gunn {

/// Ordered, pairwise-disjoint channel segments c_1..c_l whose union is {0..n-1}.
/// Segment i is always evaluated before segment i+1.
class ChannelPartition {
 public:
  ChannelPartition() = default;

  ChannelPartition(std::size_t channels, std::vector<std::vector<std::size_t>> segments)
      : channels_(channels), segments_(std::move(segments)) {
    std::vector<int> seen(channels_, 0);
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      if (segments_[i].empty()) throw ValidationError("channel partition: segment " + std::to_string(i) + " is empty");
      for (auto c : segments_[i]) {
        if (c >= channels_) {
          throw ValidationError("channel partition: channel " + std::to_string(c) + " outside 0.." +
                                std::to_string(channels_ - 1));
        }
        if (seen[c]++) throw ValidationError("channel partition: channel " + std::to_string(c) + " appears twice");
      }
    }
    for (std::size_t c = 0; c < channels_; ++c) {
      if (!seen[c]) throw ValidationError("channel partition: channel " + std::to_string(c) + " is not covered");
    }
  }

  /// P equal contiguous segments in ascending channel order.
  static ChannelPartition even(std::size_t channels, std::size_t parts) {
    if (parts == 0 || channels % parts != 0) {
      throw ValidationError("cannot split " + std::to_string(channels) + " channels into " + std::to_string(parts) +
                            " equal segments");
    }
    const std::size_t size = channels / parts;
    std::vector<std::vector<std::size_t>> segs(parts);
    for (std::size_t i = 0; i < parts; ++i)
      for (std::size_t k = 0; k < size; ++k) segs[i].push_back(i * size + k);
    return ChannelPartition(channels, std::move(segs));
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return segments_.size(); }
  std::span<const std::size_t> segment(std::size_t i) const { return segments_.at(i); }
  const std::vector<std::vector<std::size_t>>& segments() const noexcept { return segments_; }

  friend bool operator==(const ChannelPartition&, const ChannelPartition&) = default;

 private:
  std::size_t channels_ = 0;
  std::vector<std::vector<std::size_t>> segments_;
};

}  // namespace gunn
