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

#include <sstream>

#include "support/oracles.hpp"

namespace gunn {
namespace {

using testing::check_gradient;
using testing::dot;

TEST(Tensor, RejectsZeroDimensionsAndSizeMismatch) {
  EXPECT_THROW(Tensor<double>({2, 0, 3}), ShapeError);
  EXPECT_THROW(Tensor<double>({2, 2}, std::vector<double>(3)), ShapeError);
  Tensor<double> a({2, 2}), b({4});
  EXPECT_THROW(a += b, ShapeError);
}

TEST(Tensor, ChannelGatherScatterRoundTrip) {
  Rng rng(1);
  auto x = random_normal<double>({2, 5, 3, 3}, rng);
  std::vector<std::size_t> idx{1, 3, 4};
  auto g = gather_channels(x, std::span<const std::size_t>(idx));
  EXPECT_EQ(g.shape(), (Shape{2, 3, 3, 3}));
  EXPECT_EQ(g.at(1, 2, 0, 1), x.at(1, 4, 0, 1));
  Tensor<double> y(x.shape());
  scatter_channels(y, std::span<const std::size_t>(idx), g);
  EXPECT_EQ(y.at(0, 3, 2, 2), x.at(0, 3, 2, 2));
  EXPECT_EQ(y.at(0, 0, 2, 2), 0.0);
}

TEST(Serialize, RoundTripIsExact) {
  Rng rng(2);
  auto x = random_normal<double>({2, 3, 4, 5}, rng);
  std::stringstream ss;
  write_tensor(ss, x);
  EXPECT_EQ(ss.str().substr(0, 4), "GTNS");
  EXPECT_EQ(read_tensor<double>(ss), x);
}

TEST(Serialize, RejectsBadMagic) {
  std::stringstream ss("XXXX0000");
  EXPECT_THROW(read_tensor<double>(ss), FormatError);
}

TEST(Conv2d, OnesKernelSumsNine) {
  Tensor<double> x({1, 1, 3, 3}, 1.0);
  ConvParams<double> p(1, 1, 3);
  p.weight.value.fill(1.0);
  auto y = conv2d_forward(x, p);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y[0], 9.0);
}

TEST(Conv2d, ScalarCaseWithBias) {
  Tensor<double> x({1, 1, 1, 1}, 3.0);
  ConvParams<double> p(1, 1, 1, 1, 0, true);
  p.weight.value[0] = 2.0;
  p.bias->value[0] = 0.5;
  EXPECT_EQ(conv2d_forward(x, p)[0], 6.5);
  auto g = conv2d_backward(x, p, Tensor<double>({1, 1, 1, 1}, 4.0));
  EXPECT_EQ(g.weight[0], 12.0);
  EXPECT_EQ(g.input[0], 8.0);
  EXPECT_EQ((*g.bias)[0], 4.0);
}

TEST(Conv2d, MatchesNestedLoopReference) {
  Rng rng(3);
  struct Case {
    Shape in;
    std::size_t out, k, stride, pad;
    bool bias;
  };
  for (const auto& c : {Case{{2, 3, 8, 8}, 4, 3, 1, 1, false}, Case{{1, 2, 7, 9}, 3, 3, 2, 1, true},
                        Case{{2, 5, 4, 4}, 6, 1, 1, 0, true}, Case{{1, 3, 11, 11}, 2, 7, 2, 3, false},
                        Case{{1, 2, 5, 5}, 2, 1, 2, 0, false}}) {
    auto x = random_normal<double>(c.in, rng);
    ConvParams<double> p(c.out, c.in[1], c.k, c.stride, c.pad, c.bias);
    testing::randomize_params(p, rng);
    EXPECT_LT(max_abs_diff(conv2d_forward(x, p), testing::naive_conv2d(x, p)), 1e-12) << to_string(c.in);
  }
}

TEST(Conv2d, ShapeMismatchNamesBothShapes) {
  Tensor<double> x({1, 3, 4, 4});
  ConvParams<double> p(2, 5, 3);
  try {
    conv2d_forward(x, p);
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1x3x4x4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2x5x3x3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(conv2d_backward(Tensor<double>({1, 5, 4, 4}), p, Tensor<double>({1, 2, 3, 3})), ShapeError);
}

TEST(Conv2d, ZeroGradGivesZeroGrads) {
  Rng rng(4);
  auto x = random_normal<double>({1, 2, 5, 5}, rng);
  ConvParams<double> p(3, 2, 3, 1, 1, true);
  testing::randomize_params(p, rng);
  auto g = conv2d_backward(x, p, Tensor<double>({1, 3, 5, 5}));
  EXPECT_EQ(max_abs(g.input), 0.0);
  EXPECT_EQ(max_abs(g.weight), 0.0);
  EXPECT_EQ(max_abs(*g.bias), 0.0);
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
  Rng rng(5);
  for (auto [stride, pad, k] : {std::tuple{1, 1, 3}, std::tuple{2, 1, 3}, std::tuple{1, 0, 1}}) {
    auto x = random_normal<double>({2, 3, 5, 5}, rng);
    ConvParams<double> p(2, 3, k, stride, pad, true);
    testing::randomize_params(p, rng);
    auto w = random_normal<double>(conv2d_forward(x, p).shape(), rng);
    auto loss = [&] { return dot(conv2d_forward(x, p), w); };
    auto g = conv2d_backward(x, p, w);
    check_gradient(loss, x, g.input, 1e-6, "conv input");
    check_gradient(loss, p.weight.value, g.weight, 1e-6, "conv weight");
    check_gradient(loss, p.bias->value, *g.bias, 1e-6, "conv bias");
  }
}

TEST(BatchNorm, BackwardMatchesFiniteDifferencesInBothPhases) {
  Rng rng(6);
  for (Phase phase : {Phase::replay, Phase::inference}) {
    for (Shape shape : {Shape{3, 4, 3, 2}, Shape{5, 3}}) {
      auto x = random_normal<double>(shape, rng);
      BatchNormParams<double> p(shape[1]);
      testing::randomize_params(p, rng);
      for (std::size_t c = 0; c < shape[1]; ++c) {
        p.running_mean[c] = 0.1 * c;
        p.running_var[c] = 1.0 + 0.2 * c;
      }
      auto w = random_normal<double>(shape, rng);
      auto loss = [&] { return dot(batchnorm_forward(x, p, phase), w); };
      BatchNormCache<double> cache;
      batchnorm_forward(x, p, phase, &cache);
      auto g = batchnorm_backward(cache, p, w);
      check_gradient(loss, x, g.input, 1e-6, "bn input");
      check_gradient(loss, p.scale.value, g.scale, 1e-6, "bn scale");
      check_gradient(loss, p.shift.value, g.shift, 1e-6, "bn shift");
    }
  }
}

TEST(BatchNorm, ZeroVarianceChannelStaysFinite) {
  Tensor<double> x({4, 2, 2, 2}, 3.0);
  BatchNormParams<double> p(2);
  auto y = batchnorm_forward(x, p, Phase::training);
  EXPECT_TRUE(all_finite(y));
  EXPECT_EQ(max_abs(y), 0.0);
  for (double v : p.running_var) EXPECT_GT(v, 0.0);
}

TEST(BatchNorm, TrainingUpdatesRunningStatsReplayDoesNot) {
  Rng rng(7);
  auto x = random_normal<double>({4, 2, 3, 3}, rng);
  BatchNormParams<double> p(2);
  batchnorm_forward(x, p, Phase::replay);
  EXPECT_EQ(p.running_mean[0], 0.0);
  EXPECT_EQ(p.running_var[0], 1.0);
  batchnorm_forward(x, p, Phase::training);
  EXPECT_NE(p.running_mean[0], 0.0);
}

TEST(Relu, ForwardAndBackward) {
  Tensor<double> x({3}, std::vector<double>{-1, 0, 2});
  auto y = relu_forward(x);
  EXPECT_EQ(y, Tensor<double>({3}, std::vector<double>{0, 0, 2}));
  auto g = relu_backward(y, Tensor<double>({3}, std::vector<double>{5, 6, 7}));
  EXPECT_EQ(g, Tensor<double>({3}, std::vector<double>{0, 0, 7}));
}

TEST(Pool, AvgPoolThenUpscalePreservesWindowMeans) {
  Rng rng(8);
  auto x = random_normal<double>({2, 3, 6, 4}, rng);
  auto pooled = avgpool2x2_forward(x);
  auto again = avgpool2x2_forward(upscale2x(pooled));
  EXPECT_LT(max_abs_diff(pooled, again), 1e-15);
}

TEST(Pool, BackwardsMatchFiniteDifferences) {
  Rng rng(9);
  auto x = random_normal<double>({2, 2, 6, 6}, rng);
  {
    auto w = random_normal<double>({2, 2, 3, 3}, rng);
    auto loss = [&] { return dot(avgpool2x2_forward(x), w); };
    check_gradient(loss, x, avgpool2x2_backward(x.shape(), w), 1e-6, "avgpool");
  }
  {
    auto r = maxpool_forward(x);
    auto w = random_normal<double>(r.output.shape(), rng);
    auto loss = [&] { return dot(maxpool_forward(x).output, w); };
    check_gradient(loss, x, maxpool_backward(x.shape(), r.argmax, w), 1e-6, "maxpool");
  }
  {
    auto w = random_normal<double>({2, 2}, rng);
    auto loss = [&] { return dot(global_avgpool_forward(x), w); };
    check_gradient(loss, x, global_avgpool_backward(x.shape(), w), 1e-6, "gap");
  }
}

TEST(Linear, BackwardMatchesFiniteDifferences) {
  Rng rng(10);
  auto x = random_normal<double>({3, 5}, rng);
  LinearParams<double> p(5, 4);
  testing::randomize_params(p, rng);
  auto w = random_normal<double>({3, 4}, rng);
  auto loss = [&] { return dot(linear_forward(x, p), w); };
  auto g = linear_backward(x, p, w);
  check_gradient(loss, x, g.input, 1e-6, "linear input");
  check_gradient(loss, p.weight.value, g.weight, 1e-6, "linear weight");
  check_gradient(loss, p.bias->value, *g.bias, 1e-6, "linear bias");
}

TEST(SoftmaxCrossEntropy, UniformLogitsGiveLogK) {
  for (std::size_t k : {2u, 10u, 100u}) {
    Tensor<double> logits({3, k});
    std::vector<int> labels{0, static_cast<int>(k) - 1, 1};
    EXPECT_NEAR(softmax_cross_entropy(logits, std::span<const int>(labels)).loss, std::log(double(k)), 1e-12);
  }
}

TEST(SoftmaxCrossEntropy, GradientMatchesFiniteDifferencesAndRejectsBadLabels) {
  Rng rng(11);
  auto logits = random_normal<double>({4, 6}, rng, 2.0);
  std::vector<int> labels{0, 5, 2, 2};
  auto loss = [&] { return softmax_cross_entropy(logits, std::span<const int>(labels)).loss; };
  check_gradient(loss, logits, softmax_cross_entropy(logits, std::span<const int>(labels)).grad, 1e-6, "logits");
  std::vector<int> bad{0, 6, 1, 1};
  EXPECT_THROW(softmax_cross_entropy(logits, std::span<const int>(bad)), ValidationError);
  std::vector<int> negative{0, -1, 1, 1};
  EXPECT_THROW(softmax_cross_entropy(logits, std::span<const int>(negative)), ValidationError);
}

TEST(Determinism, RepeatedConvolutionIsBitIdentical) {
  Rng a(12), b(12);
  auto xa = random_normal<double>({2, 4, 9, 9}, a);
  auto xb = random_normal<double>({2, 4, 9, 9}, b);
  ConvParams<double> p(5, 4, 3, 1, 1);
  Rng r(13);
  testing::randomize_params(p, r);
  EXPECT_EQ(conv2d_forward(xa, p), conv2d_forward(xb, p));
}

}  // namespace
}  // namespace gunn
