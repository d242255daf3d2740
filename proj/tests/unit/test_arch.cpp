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

TEST(ParameterCount, PublishedTotals) {
  EXPECT_EQ(parameter_count(build_gunn15(10)), 1585746u);
  EXPECT_EQ(parameter_count(build_gunn15(100)), 1618236u);
  EXPECT_EQ(parameter_count(build_gunn24(10)), 29534106u);
  EXPECT_EQ(parameter_count(build_gunn24(100)), 29631396u);
  EXPECT_EQ(parameter_count(build_gunn18()), 28909736u);
  EXPECT_EQ(parameter_count(build_wide_gunn18()), 45624936u);
}

TEST(ParameterCount, SingleLayerCases) {
  EXPECT_EQ(ConvParams<double>(64, 3, 3).parameter_count(), 1728u);
  EXPECT_EQ(LinearParams<double>(360, 10).parameter_count(), 3610u);
}

TEST(ParameterCount, BreakdownIsAdditive) {
  for (const auto& name : preset_names()) {
    auto b = parameter_breakdown(build_preset(name));
    std::size_t sum = 0;
    for (const auto& s : b.stages) sum += s.params;
    EXPECT_EQ(sum, b.total) << name;
  }
}

TEST(ParameterCount, MatchesRuntimeNetwork) {
  for (auto spec : {build_gunn15(10), build_gunn15_nores(100)}) {
    Network<float> net(spec);
    EXPECT_EQ(net.parameter_count(), parameter_count(spec)) << spec.name;
  }
  auto tiny = build_tiny_pair({{1, 4}, {}, 1, ShortcutKind::identity}).first;
  Network<double> net(tiny);
  EXPECT_EQ(net.parameter_count(), parameter_count(tiny));
}

TEST(ParameterCount, ConvBiasAddsOnePerOutputChannel) {
  auto spec = build_gunn15(10);
  auto biased = spec;
  biased.conv_bias = true;
  Network<float> net(biased);
  EXPECT_EQ(net.parameter_count(), parameter_count(biased));
  EXPECT_GT(parameter_count(biased), parameter_count(spec));
}

TEST(Presets, ClassCountOnlyChangesTheHead) {
  auto a = build_gunn15(10), b = build_gunn15(100);
  EXPECT_EQ(a.stages, b.stages);
  EXPECT_EQ(a.stem, b.stem);
  EXPECT_NE(a.head, b.head);
  auto pa = parameter_breakdown(a), pb = parameter_breakdown(b);
  for (std::size_t i = 0; i + 1 < pa.stages.size(); ++i) EXPECT_EQ(pa.stages[i].params, pb.stages[i].params);
}

TEST(Presets, Structure) {
  for (const auto& g : build_gunn24().gunn_stages()) EXPECT_EQ(g.layer.M, 2u);
  auto g15 = build_gunn15();
  std::vector<GunnLayerConfig> want{{240, 20, 2, 1}, {300, 25, 2, 1}, {360, 30, 2, 1}};
  ASSERT_EQ(g15.gunn_stages().size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(g15.gunn_stages()[i].layer, want[i]);
  EXPECT_EQ(g15.stage_extents(), (std::vector<std::size_t>{32, 32, 16, 16, 8, 8}));
  for (auto s : {build_gunn18(), build_wide_gunn18()}) {
    EXPECT_EQ(s.head.classes, 1000u);
    EXPECT_TRUE(std::holds_alternative<GunnStageSpec>(s.stages.back()));
    EXPECT_EQ(s.stage_extents().front(), 56u);
    EXPECT_EQ(s.stage_extents().back(), 7u);
  }
  EXPECT_THROW(build_gunn15(7), ValidationError);
}

TEST(Spec, RejectsInconsistentNetworks) {
  auto s = build_gunn15();
  auto bad = s;
  std::get<TransitionSpec>(bad.stages[1]).out = 301;
  EXPECT_THROW(bad.validate(), ValidationError);

  bad = s;
  std::get<TransitionSpec>(bad.stages[1]).pool = PoolKind::none;  // two gunn stages at 32x32
  std::get<TransitionSpec>(bad.stages[1]).out = 300;
  EXPECT_THROW(bad.validate(), ValidationError);

  bad = s;
  std::get<GunnStageSpec>(bad.stages[0]).layer.P = 7;
  EXPECT_THROW(bad.validate(), ValidationError);

  bad = s;
  bad.head.features = 100;
  EXPECT_THROW(parameter_count(bad), ValidationError);
}

TEST(ConvertMode, InvolutionAndCountInvariance) {
  for (const auto& name : preset_names()) {
    auto s = build_preset(name);
    auto t = convert_mode(s, UpdateMode::simultaneous);
    for (const auto& g : t.gunn_stages()) EXPECT_EQ(g.mode, UpdateMode::simultaneous);
    EXPECT_EQ(convert_mode(t, UpdateMode::gradual), s);
    EXPECT_EQ(toggle_mode(toggle_mode(s)), s);
    EXPECT_EQ(parameter_count(t), parameter_count(s));
  }
}

TEST(TinyPair, ScaledTwinsShareEverythingButMode) {
  auto [g, s] = build_tiny_pair({{1, 4}, {}, 1, ShortcutKind::projection});
  std::vector<std::size_t> ns;
  for (const auto& st : g.gunn_stages()) ns.push_back(st.layer.N);
  EXPECT_EQ(ns, (std::vector<std::size_t>{60, 75, 90}));
  EXPECT_EQ(convert_mode(s, UpdateMode::gradual), g);
  EXPECT_EQ(parameter_count(g), parameter_count(s));
}

TEST(TinyPair, IndivisibleScalingIsRejectedWithDiagnostic) {
  try {
    build_tiny_pair({{1, 10}, {}, 1, ShortcutKind::projection});
    FAIL() << "expected rejection";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("not divisible by P=20"), std::string::npos) << e.what();
  }
  EXPECT_THROW(build_tiny_pair({{1, 7}, {}, 1, ShortcutKind::projection}), ValidationError);
  EXPECT_THROW(build_tiny_pair({{1, 4}, {10, 15}, 1, ShortcutKind::projection}), ValidationError);
}

TEST(TinyPair, PartitionOverrideGivesValidPair) {
  auto [g, s] = build_tiny_pair({{1, 4}, {10, 15, 15}, 1, ShortcutKind::projection});
  EXPECT_EQ(g.gunn_stages()[1].layer.P, 15u);
  EXPECT_EQ(parameter_count(g), parameter_count(s));
}

TEST(Fraction, Parses) {
  EXPECT_EQ(Fraction::parse("1/4").den, 4u);
  auto f = Fraction::parse("0.25");
  EXPECT_EQ(f.num, 1u);
  EXPECT_EQ(f.den, 4u);
  EXPECT_THROW(Fraction::parse("abc"), ValidationError);
  EXPECT_THROW(Fraction::parse("1/0"), ValidationError);
}

TEST(ConfigIo, RoundTripIsIdentity) {
  for (const auto& name : preset_names()) {
    auto s = build_preset(name);
    EXPECT_EQ(parse_spec(to_json(s).dump()), s) << name;
  }
  auto tiny = build_tiny_pair({{1, 4}, {10, 15, 15}, 2, ShortcutKind::none}).second;
  EXPECT_EQ(parse_spec(to_json(tiny).dump(2)), tiny);
}

TEST(ConfigIo, RejectsMalformedConfigs) {
  EXPECT_THROW(parse_spec("{"), ValidationError);
  EXPECT_THROW(parse_spec("[]"), ValidationError);
  auto j = to_json(build_gunn15());
  j["stages"][0]["mode"] = "sideways";
  EXPECT_THROW(spec_from_json(j), ValidationError);
  j = to_json(build_gunn15());
  j["stages"][0].erase("N");
  EXPECT_THROW(spec_from_json(j), ValidationError);
  j = to_json(build_gunn15());
  j["stages"][0]["P"] = "twenty";
  EXPECT_THROW(spec_from_json(j), ValidationError);
}

TEST(MemoryPlan, GradualWithinSimultaneousOnEveryPreset) {
  for (const auto& name : preset_names()) {
    for (const auto& m : memory_plan(build_preset(name), 64, 4)) {
      EXPECT_LE(m.gradual, 1.2 * m.simultaneous) << name << " " << m.label;
    }
  }
  auto conv2 = memory_plan(build_gunn15(), 64, 4).front();
  EXPECT_GE(conv2.naive, 5 * conv2.gradual);
}

NetworkSpec micro_spec(UpdateMode mode, ShortcutKind shortcut) {
  NetworkSpec s;
  s.name = "micro";
  s.classes = 3;
  s.input_size = 4;
  s.stem = {3, 4, 1, 6, PoolKind::none};
  s.stages = {GunnStageSpec{{6, 3, 1, 1}, mode, shortcut}, TransitionSpec{4, PoolKind::avg},
              GunnStageSpec{{4, 2, 2, 2}, mode, shortcut}, TransitionSpec{5, PoolKind::none}};
  s.head = {5, 3};
  return s;
}

TEST(Network, GradientsMatchFiniteDifferences) {
  for (auto mode : {UpdateMode::gradual, UpdateMode::simultaneous}) {
    for (auto shortcut : {ShortcutKind::identity, ShortcutKind::projection}) {
      Network<double> net(micro_spec(mode, shortcut));
      net.initialize(11);
      Rng rng(5);
      auto x = random_normal<double>({3, 3, 4, 4}, rng);
      std::vector<int> labels{0, 2, 1};
      auto loss = [&] { return softmax_cross_entropy(net.forward(x, Phase::replay), std::span<const int>(labels)).loss; };
      auto out = softmax_cross_entropy(net.forward(x, Phase::replay, true), std::span<const int>(labels));
      auto gx = net.backward(out.grad);
      testing::check_gradient(loss, x, gx, 1e-5, "network input");
      net.for_each_param("", [&](const std::string& name, Param<double>& p) {
        testing::check_gradient(loss, p.value, p.grad, 1e-5, name, 5);
      });
    }
  }
}

TEST(Network, StemMaxPoolPathMatchesFiniteDifferences) {
  auto s = micro_spec(UpdateMode::gradual, ShortcutKind::identity);
  s.input_size = 8;
  s.stem = {3, 4, 2, 6, PoolKind::max};
  Network<double> net(s);
  net.initialize(3);
  Rng rng(6);
  auto x = random_normal<double>({2, 3, 8, 8}, rng);
  std::vector<int> labels{1, 2};
  auto loss = [&] { return softmax_cross_entropy(net.forward(x, Phase::replay), std::span<const int>(labels)).loss; };
  auto out = softmax_cross_entropy(net.forward(x, Phase::replay, true), std::span<const int>(labels));
  auto gx = net.backward(out.grad);
  testing::check_gradient(loss, x, gx, 1e-5, "network input");
}

TEST(Network, BackwardWithoutRecordedForwardIsRejected) {
  Network<double> net(micro_spec(UpdateMode::gradual, ShortcutKind::identity));
  EXPECT_THROW(net.backward(Tensor<double>({1, 3})), ValidationError);
  EXPECT_THROW(net.forward(Tensor<double>({1, 2, 4, 4}), Phase::inference), ShapeError);
}

TEST(Network, HeInitializationScale) {
  Network<double> net(build_tiny_pair({{1, 4}, {}, 1, ShortcutKind::projection}).first);
  net.initialize(1);
  net.for_each_param("", [&](const std::string& name, Param<double>& p) {
    if (p.role != ParamRole::weight || p.value.rank() != 4 || p.size() < 2000) return;
    const auto& s = p.value.shape();
    double sq = 0;
    for (double v : p.value.data()) sq += v * v;
    const double want = 2.0 / double(s[0] * s[2] * s[3]);
    EXPECT_NEAR(sq / p.size(), want, 0.15 * want) << name;
  });
}

}  // namespace
}  // namespace gunn
