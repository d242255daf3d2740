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

#include "support/oracles.hpp"

namespace gunn {
namespace {

using testing::dot;

std::span<const std::size_t> all_of(const std::vector<std::size_t>& v) { return v; }

TEST(ChannelPartition, ValidatesSegments) {
  EXPECT_NO_THROW(ChannelPartition(3, {{2}, {0, 1}}));
  EXPECT_THROW(ChannelPartition(3, {{0, 1}, {1, 2}}), ValidationError);
  EXPECT_THROW(ChannelPartition(3, {{0, 1}}), ValidationError);
  EXPECT_THROW(ChannelPartition(3, {{0, 1, 2}, {}}), ValidationError);
  EXPECT_THROW(ChannelPartition(3, {{0, 1, 3}}), ValidationError);
  EXPECT_THROW(ChannelPartition::even(10, 3), ValidationError);
  auto p = ChannelPartition::even(6, 3);
  EXPECT_EQ(p.segment(1)[0], 2u);
  EXPECT_EQ(p.segment(2)[1], 5u);
}

TEST(UpdateUnit, ZeroWeightsGiveIdentityUpdate) {
  Rng rng(1);
  auto x = random_normal<double>({2, 4, 3, 3}, rng);
  auto unit = UpdateUnit<double>::make_bottleneck(4, 2, 2, 2, ShortcutKind::identity);
  std::vector<std::size_t> seg{2, 3};
  for (Phase phase : {Phase::training, Phase::inference}) {
    EXPECT_EQ(max_abs(update_unit_forward(x, unit, all_of(seg), phase)), 0.0);
  }
}

TEST(UpdateUnit, HandEvaluatedSingleChannelChain) {
  auto unit = UpdateUnit<double>::make_bottleneck(1, 1, 1, 1, ShortcutKind::identity);
  auto& b = unit.blocks[0];
  const double eps = b.bn1.epsilon;
  b.conv1.weight.value[0] = 1.5;
  b.bn1.running_mean = {1.0};
  b.bn1.running_var = {4.0 - eps};
  b.bn1.shift.value[0] = 0.5;
  b.conv2.weight.value.at(0, 0, 1, 1) = -2.0;
  b.conv2.weight.value.at(0, 0, 0, 0) = 100.0;  // only sees padding on a 1x1 map
  b.bn2.running_var = {1.0 - eps};
  b.bn2.shift.value[0] = 4.0;
  b.conv3.weight.value[0] = 3.0;
  b.bn3.running_mean = {1.0};
  b.bn3.running_var = {4.0 - eps};
  b.bn3.scale.value[0] = 2.0;
  b.bn3.shift.value[0] = -1.0;
  // x = 2: 1.5*2 = 3 -> (3-1)/2 + 0.5 = 1.5 -> relu 1.5 -> -2*1.5 = -3 -> -3 + 4 = 1 -> relu 1
  //        -> 3*1 = 3 -> 2*(3-1)/2 - 1 = 1
  Tensor<double> x({1, 1, 1, 1}, 2.0);
  std::vector<std::size_t> seg{0};
  auto delta = update_unit_forward(x, unit, all_of(seg), Phase::inference);
  EXPECT_NEAR(delta[0], 1.0, 1e-12);
  EXPECT_NEAR(unit_apply(x, unit, all_of(seg), Phase::inference)[0], 3.0, 1e-12);
}

TEST(UpdateUnit, RejectsMismatchedSegmentAndState) {
  auto unit = UpdateUnit<double>::make_bottleneck(4, 2, 1, 1, ShortcutKind::identity);
  std::vector<std::size_t> three{0, 1, 2}, two{0, 1};
  EXPECT_THROW(update_unit_forward(Tensor<double>({1, 4, 2, 2}), unit, all_of(three)), ShapeError);
  EXPECT_THROW(update_unit_forward(Tensor<double>({1, 5, 2, 2}), unit, all_of(two)), ShapeError);
}

TEST(UpdateUnit, BackwardMatchesFiniteDifferences) {
  Rng rng(2);
  for (auto shortcut : {ShortcutKind::identity, ShortcutKind::projection, ShortcutKind::none}) {
    auto x = random_normal<double>({2, 4, 3, 3}, rng);
    auto unit = UpdateUnit<double>::make_bottleneck(4, 2, 2, 2, shortcut);
    testing::randomize_params(unit, rng);
    std::vector<std::size_t> seg{1, 3};
    auto w = random_normal<double>({2, 2, 3, 3}, rng);
    auto loss = [&] { return dot(unit_apply(x, unit, all_of(seg), Phase::replay), w); };
    UnitCache<double> cache;
    unit_apply(x, unit, all_of(seg), Phase::replay, &cache);
    auto bw = unit_backward(x, unit, all_of(seg), cache, w);
    Tensor<double> gin = bw.branch;
    if (bw.skip) add_channels(gin, all_of(seg), *bw.skip);
    EXPECT_EQ(bw.skip.has_value(), shortcut == ShortcutKind::identity);
    testing::check_gradient(loss, x, gin, 1e-5, "unit input");
    unit.for_each_param("", [&](const std::string& name, Param<double>& p) {
      testing::check_gradient(loss, p.value, p.grad, 1e-5, name);
    });
  }
}

GunnLayer<double> two_channel_linear(UpdateMode mode) {
  auto layer = make_linear_gunn_layer<double>(2, 2, ShortcutKind::identity, mode);
  layer.units[0].linear_map->weight.value[0] = 0.0;
  layer.units[0].linear_map->weight.value[1] = 1.0;
  layer.units[1].linear_map->weight.value[0] = 1.0;
  layer.units[1].linear_map->weight.value[1] = 0.0;
  return layer;
}

TEST(GunnForward, TwoChannelLinearExample) {
  Tensor<double> x({1, 2, 1, 1}, std::vector<double>{1, 2});
  auto gradual = two_channel_linear(UpdateMode::gradual);
  auto simultaneous = two_channel_linear(UpdateMode::simultaneous);
  EXPECT_EQ(gunn_forward(x, gradual).storage(), (std::vector<double>{3, 5}));
  EXPECT_EQ(gunn_forward(x, simultaneous).storage(), (std::vector<double>{3, 3}));
}

TEST(GunnForward, SingleSegmentModesCoincideBitwise) {
  Rng rng(3);
  auto x = random_normal<double>({2, 6, 4, 4}, rng);
  auto layer = make_gunn_layer<double>(6, 1, 2, 2, ShortcutKind::projection);
  testing::randomize_params(layer, rng);
  auto a = gunn_forward(x, layer, Phase::replay);
  layer.mode = UpdateMode::simultaneous;
  EXPECT_EQ(a, gunn_forward(x, layer, Phase::replay));
}

TEST(GunnForward, ZeroWeightUnitsLeaveInputUnchanged) {
  Rng rng(4);
  auto x = random_normal<double>({2, 6, 3, 3}, rng);
  for (auto mode : {UpdateMode::gradual, UpdateMode::simultaneous}) {
    auto layer = make_gunn_layer<double>(6, 3, 2, 1, ShortcutKind::identity, mode);
    EXPECT_EQ(gunn_forward(x, layer, Phase::training), x);
  }
}

TEST(GunnForward, RejectsChannelMismatch) {
  auto layer = make_gunn_layer<double>(6, 3, 1, 1);
  EXPECT_THROW(gunn_forward(Tensor<double>({1, 5, 2, 2}), layer), ShapeError);
}

TEST(GunnForward, EachSegmentEqualsItsUnitOnItsStageState) {
  Rng rng(5);
  auto x = random_normal<double>({2, 8, 3, 3}, rng);
  auto layer = make_gunn_layer<double>(8, 4, 2, 1, ShortcutKind::projection);
  testing::randomize_params(layer, rng);
  auto y = gunn_forward(x, layer, Phase::replay);
  Tensor<double> state = x;
  for (std::size_t i = 0; i < layer.size(); ++i) {
    auto seg = layer.partition.segment(i);
    auto f = unit_apply(state, layer.units[i], seg, Phase::replay);
    EXPECT_EQ(max_abs_diff(gather_channels(y, seg), f), 0.0) << "segment " << i;
    scatter_channels(state, seg, f);
  }
}

TEST(GunnLayer, ModesShareParameters) {
  Rng rng(6);
  auto layer = make_gunn_layer<double>(12, 4, 2, 2);
  testing::randomize_params(layer, rng);
  auto twin = layer;
  twin.mode = UpdateMode::simultaneous;
  EXPECT_EQ(layer.parameter_count(), twin.parameter_count());
  std::vector<double> a, b;
  layer.for_each_param("", [&](const std::string&, Param<double>& p) { a.insert(a.end(), p.value.data().begin(), p.value.data().end()); });
  twin.for_each_param("", [&](const std::string&, Param<double>& p) { b.insert(b.end(), p.value.data().begin(), p.value.data().end()); });
  EXPECT_EQ(a, b);
}

struct LayerCase {
  std::size_t n, p, k, m;
  ShortcutKind shortcut;
};

std::vector<LayerCase> oracle_cases() {
  std::vector<LayerCase> cases;
  const std::pair<std::size_t, std::size_t> np[] = {{6, 1}, {8, 2}, {12, 3}, {12, 4}, {24, 6}, {24, 4}};
  for (auto [n, p] : np)
    for (std::size_t k : {1u, 2u})
      for (std::size_t m : {1u, 2u})
        for (auto s : {ShortcutKind::identity, ShortcutKind::projection, ShortcutKind::none})
          cases.push_back({n, p, k, m, s});
  return cases;
}

TEST(GunnBackward, MatchesUnrolledAdjoint) {
  Rng rng(7);
  for (const auto& c : oracle_cases()) {
    auto x = random_normal<double>({2, c.n, 3, 3}, rng);
    auto layer = make_gunn_layer<double>(c.n, c.p, c.k, c.m, c.shortcut);
    testing::randomize_params(layer, rng, 0.3);
    auto w = random_normal<double>(x.shape(), rng);
    auto reference = layer;

    StageTape<double> tape;
    gunn_forward(x, layer, Phase::training, &tape);
    auto got = gunn_backward(tape, layer, w);
    auto want = testing::unrolled_gradual_adjoint(x, reference, w);

    const std::string label = "N=" + std::to_string(c.n) + " P=" + std::to_string(c.p) + " K=" +
                              std::to_string(c.k) + " M=" + std::to_string(c.m) + " shortcut=" +
                              std::to_string(static_cast<int>(c.shortcut));
    EXPECT_LT(max_abs_diff(got.grad_input, want), 1e-10) << label;
    auto ga = testing::flat_grads(layer), gb = testing::flat_grads(reference);
    ASSERT_EQ(ga.size(), gb.size());
    double worst = 0;
    for (std::size_t i = 0; i < ga.size(); ++i) worst = std::max(worst, std::abs(ga[i] - gb[i]));
    EXPECT_LT(worst, 1e-10) << label;
  }
}

TEST(GunnBackward, MatchesFiniteDifferences) {
  Rng rng(8);
  for (const auto& c : {LayerCase{6, 3, 2, 1, ShortcutKind::identity}, LayerCase{8, 4, 1, 2, ShortcutKind::projection},
                        LayerCase{6, 2, 2, 2, ShortcutKind::none}}) {
    auto x = random_normal<double>({2, c.n, 3, 3}, rng);
    auto layer = make_gunn_layer<double>(c.n, c.p, c.k, c.m, c.shortcut);
    testing::randomize_params(layer, rng, 0.3);
    auto w = random_normal<double>(x.shape(), rng);
    auto loss = [&] { return dot(gunn_forward(x, layer, Phase::replay), w); };
    StageTape<double> tape;
    gunn_forward(x, layer, Phase::replay, &tape);
    auto got = gunn_backward(tape, layer, w);
    testing::check_gradient(loss, x, got.grad_input, 1e-5, "gunn input");
    layer.for_each_param("", [&](const std::string& name, Param<double>& p) {
      testing::check_gradient(loss, p.value, p.grad, 1e-5, name, 3);
    });
  }
}

TEST(GunnBackward, ZeroGradientGivesZeros) {
  Rng rng(9);
  auto x = random_normal<double>({2, 6, 3, 3}, rng);
  auto layer = make_gunn_layer<double>(6, 3, 2, 2, ShortcutKind::projection);
  testing::randomize_params(layer, rng);
  StageTape<double> tape;
  gunn_forward(x, layer, Phase::training, &tape);
  auto got = gunn_backward(tape, layer, Tensor<double>(x.shape()));
  EXPECT_EQ(max_abs(got.grad_input), 0.0);
  for (double g : testing::flat_grads(layer)) ASSERT_EQ(g, 0.0);
}

TEST(GunnBackward, RejectsForeignOrWrongModeTapes) {
  Rng rng(10);
  auto x = random_normal<double>({1, 6, 2, 2}, rng);
  auto layer = make_gunn_layer<double>(6, 3, 1, 1);
  auto other = make_gunn_layer<double>(6, 2, 1, 1);
  StageTape<double> tape;
  gunn_forward(x, layer, Phase::training, &tape);
  EXPECT_THROW(gunn_backward(tape, other, x), ValidationError);
  EXPECT_THROW(gunn_backward(tape, layer, Tensor<double>({1, 6, 3, 3})), ShapeError);

  layer.mode = UpdateMode::simultaneous;
  StageTape<double> sunn_tape;
  gunn_forward(x, layer, Phase::training, &sunn_tape);
  EXPECT_THROW(gunn_backward(sunn_tape, layer, x), ValidationError);
  StageTape<double> empty;
  EXPECT_THROW(gunn_backward(empty, layer, x), ValidationError);
}

TEST(GunnBackward, LinearUnitsFollowTheTwoChannelAdjoint) {
  // y0 = x0 + x1, y1 = x1 + y0 = x0 + 2 x1 in gradual mode; y1 = x0 + x1 simultaneously.
  Tensor<double> x({1, 2, 1, 1}, std::vector<double>{1, 2});
  auto jacobian = [&](UpdateMode mode) {
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < 2; ++r) {
      auto layer = two_channel_linear(mode);
      StageTape<double> tape;
      gunn_forward(x, layer, Phase::replay, &tape);
      Tensor<double> e({1, 2, 1, 1});
      e[r] = 1.0;
      rows.push_back(layer_backward(tape, layer, e).grad_input.storage());
    }
    return rows;
  };
  auto g = jacobian(UpdateMode::gradual);
  EXPECT_EQ(g, (std::vector<std::vector<double>>{{1, 1}, {1, 2}}));
  auto s = jacobian(UpdateMode::simultaneous);
  EXPECT_EQ(s, (std::vector<std::vector<double>>{{1, 1}, {1, 1}}));
}

TEST(SunnBackward, MatchesFiniteDifferences) {
  Rng rng(11);
  auto x = random_normal<double>({2, 8, 3, 3}, rng);
  auto layer = make_gunn_layer<double>(8, 4, 2, 2, ShortcutKind::projection, UpdateMode::simultaneous);
  testing::randomize_params(layer, rng, 0.3);
  auto w = random_normal<double>(x.shape(), rng);
  auto loss = [&] { return dot(gunn_forward(x, layer, Phase::replay), w); };
  auto got = sunn_backward(x, layer, w);
  testing::check_gradient(loss, x, got.grad_input, 1e-5, "sunn input");
  layer.for_each_param("", [&](const std::string& name, Param<double>& p) {
    testing::check_gradient(loss, p.value, p.grad, 1e-5, name, 3);
  });
}

TEST(SunnBackward, SingleSegmentEqualsGradualAndZeroGradGivesZeros) {
  Rng rng(12);
  auto x = random_normal<double>({2, 6, 3, 3}, rng);
  auto layer = make_gunn_layer<double>(6, 1, 2, 1);
  testing::randomize_params(layer, rng);
  auto twin = layer;
  auto w = random_normal<double>(x.shape(), rng);
  StageTape<double> tape;
  gunn_forward(x, layer, Phase::training, &tape);
  auto a = gunn_backward(tape, layer, w);
  auto b = sunn_backward(x, twin, w);
  EXPECT_LT(max_abs_diff(a.grad_input, b.grad_input), 1e-12);
  auto ga = testing::flat_grads(layer), gb = testing::flat_grads(twin);
  for (std::size_t i = 0; i < ga.size(); ++i) ASSERT_NEAR(ga[i], gb[i], 1e-12);

  testing::zero_grads(twin);
  auto z = sunn_backward(x, twin, Tensor<double>(x.shape()));
  EXPECT_EQ(max_abs(z.grad_input), 0.0);
  for (double g : testing::flat_grads(twin)) ASSERT_EQ(g, 0.0);
}

TEST(MemoryAccounting, SingleSegmentGradualEqualsNaive) {
  auto layer = make_gunn_layer<double>(16, 1, 2, 1);
  const Shape s{4, 16, 8, 8};
  EXPECT_EQ(peak_activation_bytes(layer, s, BackpropStrategy::gradual),
            peak_activation_bytes(layer, s, BackpropStrategy::naive_unrolled));
}

TEST(MemoryAccounting, NaiveIsAtLeastFiveTimesGradualOnTwentySegments) {
  auto layer = make_gunn_layer<float>(240, 20, 2, 1, ShortcutKind::projection);
  const Shape s{64, 240, 32, 32};
  const auto gradual = peak_activation_bytes(layer, s, BackpropStrategy::gradual);
  const auto naive = peak_activation_bytes(layer, s, BackpropStrategy::naive_unrolled);
  EXPECT_GE(naive, 5 * gradual);
}

TEST(MemoryAccounting, LinearInBatchAndGradualBoundedBySimultaneous) {
  for (auto [n, p, k, m] : {std::tuple{240, 20, 2, 1}, std::tuple{12, 3, 1, 2}, std::tuple{64, 1, 4, 1}}) {
    auto layer = make_gunn_layer<float>(n, p, k, m, ShortcutKind::projection);
    for (auto strat : {BackpropStrategy::gradual, BackpropStrategy::simultaneous, BackpropStrategy::naive_unrolled}) {
      EXPECT_EQ(2 * peak_activation_bytes(layer, {8, std::size_t(n), 4, 4}, strat),
                peak_activation_bytes(layer, {16, std::size_t(n), 4, 4}, strat));
    }
    const Shape s{8, std::size_t(n), 4, 4};
    EXPECT_LE(peak_activation_bytes(layer, s, BackpropStrategy::gradual),
              1.2 * peak_activation_bytes(layer, s, BackpropStrategy::simultaneous));
  }
}

TEST(MemoryAccounting, NaiveGrowsLinearlyInSegments) {
  std::vector<std::size_t> bytes;
  for (std::size_t l : {1u, 2u, 3u, 4u}) {
    auto layer = make_gunn_layer<float>(4 * l, l, 2, 1);
    bytes.push_back(peak_activation_bytes(layer, {2, 4 * l, 4, 4}, BackpropStrategy::naive_unrolled) -
                    (l + 1) * 4 * l * 2 * 16 * sizeof(float));
  }
  for (std::size_t i = 1; i < bytes.size(); ++i) EXPECT_EQ(bytes[i], bytes[0] * (i + 1));
}

TEST(MemoryAccounting, MatchesActualBuffers) {
  Rng rng(13);
  for (const auto& c : {LayerCase{8, 4, 2, 1, ShortcutKind::projection}, LayerCase{6, 2, 1, 2, ShortcutKind::identity},
                        LayerCase{12, 3, 2, 2, ShortcutKind::none}}) {
    const Shape s{2, c.n, 5, 3};
    auto x = random_normal<double>(s, rng);
    auto layer = make_gunn_layer<double>(c.n, c.p, c.k, c.m, c.shortcut);
    testing::randomize_params(layer, rng);
    StageTape<double> tape;
    gunn_forward(x, layer, Phase::training, &tape);
    const auto persistent = tape.activation_elements();
    auto bw = gunn_backward(tape, layer, x);
    EXPECT_EQ((persistent + bw.stats.peak_transient_elements) * sizeof(double),
              peak_activation_bytes(layer, s, BackpropStrategy::gradual));

    layer.mode = UpdateMode::simultaneous;
    StageTape<double> sunn;
    gunn_forward(x, layer, Phase::training, &sunn);
    EXPECT_EQ(sunn.activation_elements() * sizeof(double),
              peak_activation_bytes(layer, s, BackpropStrategy::simultaneous));
  }
}

TEST(Reference, UnrolledBackwardMatchesIndependentOracle) {
  for (auto sc : {ShortcutKind::identity, ShortcutKind::projection, ShortcutKind::none}) {
    Rng rng(41);
    auto layer = make_gunn_layer<double>(6, 3, 2, 2, sc, UpdateMode::gradual);
    testing::randomize_params(layer, rng);
    const auto x = random_normal<double>({2, 6, 3, 3}, rng);
    const auto w = random_normal<double>({2, 6, 3, 3}, rng);
    const auto ours = unrolled_backward(x, layer, w);
    const auto g_ours = testing::flat_grads(layer);
    testing::zero_grads(layer);
    const auto theirs = testing::unrolled_gradual_adjoint(x, layer, w);
    const auto g_theirs = testing::flat_grads(layer);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(ours[i], theirs[i], 1e-12);
    for (std::size_t i = 0; i < g_ours.size(); ++i) EXPECT_NEAR(g_ours[i], g_theirs[i], 1e-12);
  }
}

TEST(Reference, SimultaneousUnrolledMatchesRecomputingBackward) {
  Rng rng(42);
  auto layer = make_gunn_layer<double>(8, 4, 1, 2, ShortcutKind::projection, UpdateMode::simultaneous);
  testing::randomize_params(layer, rng);
  const auto x = random_normal<double>({3, 8, 4, 4}, rng);
  const auto w = random_normal<double>({3, 8, 4, 4}, rng);
  const auto ours = unrolled_backward(x, layer, w);
  const auto g_ours = testing::flat_grads(layer);
  testing::zero_grads(layer);
  const auto theirs = sunn_backward(x, layer, w).grad_input;
  const auto g_theirs = testing::flat_grads(layer);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(ours[i], theirs[i], 1e-12);
  for (std::size_t i = 0; i < g_ours.size(); ++i) EXPECT_NEAR(g_ours[i], g_theirs[i], 1e-12);
}

TEST(Gradcheck, DefaultRunPassesInBothModes) {
  for (auto mode : {UpdateMode::gradual, UpdateMode::simultaneous}) {
    GradcheckOptions o;
    o.configs = 6;
    o.mode = mode;
    const auto r = run_gradcheck(o);
    EXPECT_TRUE(r.pass()) << (r.violations.empty() ? "" : r.violations.front());
    EXPECT_LT(r.max_oracle_error, 1e-10);
    EXPECT_EQ(r.cases.size(), 6u);
  }
}

TEST(Gradcheck, ZeroToleranceFails) {
  GradcheckOptions o;
  o.configs = 2;
  o.oracle_tolerance = 0;
  const auto r = run_gradcheck(o);
  EXPECT_FALSE(r.pass());
  for (const auto& c : r.cases) {
    EXPECT_FALSE(c.pass);
    EXPECT_FALSE(c.worst_block.empty());
  }
}

}  // namespace
}  // namespace gunn
