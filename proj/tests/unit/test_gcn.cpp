// Copyright 2026 The debugcn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "debugcn/container.hpp"
#include "debugcn/error.hpp"
#include "debugcn/gcn.hpp"
#include "debugcn/ops.hpp"
#include "fixtures.hpp"
#include "reference.hpp"
#include "temp_dir.hpp"

namespace debugcn {
namespace {

using testing::random_tensor;

LayerGraph two_node_graph(std::vector<float> features, float weight) {
  LayerGraph g;
  g.kind = GraphKind::conv_flat;
  g.num_nodes = 2;
  const std::size_t d = features.size() / 2;
  g.node_features = Tensor::matrix(2, d, std::move(features));
  g.edges = {{0, 1}};
  g.edge_weights = {weight};
  return g;
}

GraphConvLayer layer_of(std::vector<float> w, std::vector<float> b, std::vector<float> bias,
                        std::size_t din, std::size_t dout) {
  return {Tensor::matrix(din, dout, std::move(w)), Tensor::matrix(din, dout, std::move(b)),
          Tensor({dout}, std::move(bias))};
}

std::vector<float> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

void set_all(const GcnModel& m, float v) {
  for (Tensor t : m.parameters())
    for (float& x : t.mutable_values()) x = v;
}

TEST(GraphConv, ZeroFeaturesGiveBiasRows) {
  Rng rng(1);
  GraphConvLayer l = GraphConvLayer::glorot(3, 4, rng);
  for (float& x : l.bias.mutable_values()) x = 0.5f;
  l.bias.mutable_values()[2] = -1;
  const LayerGraph g = build_conv_flat(Tensor::zeros({5, 1, 1, 3}));
  const GraphBatch b = make_batch(g);
  Tape tape;
  const Tensor out = graph_conv_forward(tape, l, b.features, b);
  for (std::size_t v = 0; v < 5; ++v)
    EXPECT_EQ((std::vector<float>{out.at(v, 0), out.at(v, 1), out.at(v, 2), out.at(v, 3)}),
              (std::vector<float>{0.5f, 0.5f, -1, 0.5f}));
}

TEST(GraphConv, IdentitySelfMapOnLoneNode) {
  const GraphConvLayer l = layer_of({0, 0, 0, 0}, {1, 0, 0, 1}, {0, 0}, 2, 2);
  const LayerGraph g = build_conv_flat(Tensor({1, 1, 1, 2}, {3.5f, -2}));
  const GraphBatch b = make_batch(g);
  Tape tape;
  EXPECT_EQ(vals(graph_conv_forward(tape, l, b.features, b)), (std::vector<float>{3.5f, -2}));
}

TEST(GraphConv, HandEvaluatedTwoNodeGraph) {
  const GraphConvLayer l = layer_of({3}, {0}, {0}, 1, 1);
  const GraphBatch b = make_batch(two_node_graph({1, 0}, 2));
  Tape tape;
  EXPECT_EQ(vals(graph_conv_forward(tape, l, b.features, b)), (std::vector<float>{0, 6}));
}

TEST(GraphConv, ReluOptionAndWidthCheck) {
  const GraphConvLayer l = layer_of({-3}, {1}, {0}, 1, 1);
  const GraphBatch b = make_batch(two_node_graph({1, 0}, 2));
  Tape tape;
  EXPECT_EQ(vals(graph_conv_forward(tape, l, b.features, b, false)), (std::vector<float>{1, -6}));
  EXPECT_EQ(vals(graph_conv_forward(tape, l, b.features, b, true)), (std::vector<float>{1, 0}));
  const GraphConvLayer wide = layer_of({1, 1}, {1, 1}, {0}, 2, 1);
  EXPECT_THROW(graph_conv_forward(tape, wide, b.features, b), ShapeError);
}

TEST(GraphConv, MatchesDoubleReference) {
  Rng rng(2);
  const LayerGraph g = testing::random_fc_graph(rng, 8, FeatureSet::gcn16b);
  GraphConvLayer l = GraphConvLayer::glorot(16, 64, rng);
  for (float& x : l.bias.mutable_values()) x = static_cast<float>(rng.normal());
  const GraphBatch b = make_batch(g);
  Tape tape;
  const Tensor out = graph_conv_forward(tape, l, b.features, b);
  testing::RefLayer rl{testing::to_dmat(l.self_weight), testing::to_dmat(l.neighbor_weight),
                       testing::to_dmat(l.bias).v};
  const testing::DMat want = testing::ref_graph_conv(rl, testing::ref_graph(g).x, testing::ref_graph(g));
  for (std::size_t i = 0; i < want.v.size(); ++i) EXPECT_NEAR(out.values()[i], want.v[i], 1e-4);
}

TEST(Model, ShapesFollowTheArchitecture) {
  GcnModel single({Modality::fc_only, FeatureSet::gcn16b, 16, 0}, 3);
  EXPECT_EQ(single.fc_branch().size(), 3u);
  EXPECT_TRUE(single.conv_branch().empty());
  EXPECT_EQ(single.fc_branch()[0].self_weight.dims(), (Shape{16, 64}));
  EXPECT_EQ(single.fc_branch()[2].neighbor_weight.dims(), (Shape{64, 64}));
  EXPECT_EQ(single.head_weight().dims(), (Shape{64, 2}));
  GcnModel dual({Modality::fc_plus_2d, FeatureSet::gcn16b, 16, 1}, 3);
  EXPECT_EQ(dual.conv_branch()[0].self_weight.dims(), (Shape{1, 64}));
  EXPECT_EQ(dual.head_weight().dims(), (Shape{128, 2}));
  EXPECT_EQ(dual.parameters().size(), 20u);
  for (float b : dual.head_bias().values()) EXPECT_EQ(b, 0.0f);
  EXPECT_THROW(GcnModel({Modality::fc_plus_flat, FeatureSet::gcn16b, 16, 0}, 1), ConfigError);
  EXPECT_THROW(GcnModel({Modality::fc_only, FeatureSet::gcn16b, 16, 4}, 1), ConfigError);
}

TEST(Model, GlorotInitIsBoundedAndSeeded) {
  GcnModel a({Modality::fc_only, FeatureSet::gcn16b, 16, 0}, 5), b({Modality::fc_only, FeatureSet::gcn16b, 16, 0}, 5),
      c({Modality::fc_only, FeatureSet::gcn16b, 16, 0}, 6);
  const double limit = std::sqrt(6.0 / (16 + 64));
  for (float w : a.fc_branch()[0].self_weight.values()) EXPECT_LE(std::abs(w), limit);
  EXPECT_EQ(vals(a.fc_branch()[1].neighbor_weight), vals(b.fc_branch()[1].neighbor_weight));
  EXPECT_NE(vals(a.fc_branch()[1].neighbor_weight), vals(c.fc_branch()[1].neighbor_weight));
}

TEST(Model, ZeroParametersGiveEvenLogits) {
  GcnModel m({Modality::fc_only, FeatureSet::gcn5, 5, 0}, 1);
  set_all(m, 0);
  const LayerGraph g = build_fc_bipartite(Tensor::matrix(1, 1, {0.3f}), FeatureConfig::of(FeatureSet::gcn5));
  Tape tape;
  EXPECT_EQ(vals(m.forward(tape, make_batch(g))), (std::vector<float>{0, 0}));
  const Prediction p = prediction_from_logits(0, 0);
  EXPECT_EQ(p.probabilities[0], 0.5);
  EXPECT_EQ(p.probabilities[1], 0.5);
}

TEST(Model, ArityMismatchIsConfigError) {
  Rng rng(3);
  const LayerGraph fc = testing::random_fc_graph(rng, 4, FeatureSet::gcn16b);
  const LayerGraph conv = build_conv_flat(random_tensor({3, 1, 2, 2}, rng));
  GcnModel single({Modality::fc_only, FeatureSet::gcn16b, 16, 0}, 1);
  GcnModel dual({Modality::fc_plus_flat, FeatureSet::gcn16b, 16, 4}, 1);
  const GraphBatch fb = make_batch(fc), cb = make_batch(conv);
  Tape tape;
  EXPECT_THROW(single.forward(tape, fb, &cb), ConfigError);
  EXPECT_THROW(dual.forward(tape, fb), ConfigError);
  const LayerGraph* two[] = {&conv, &conv};
  const GraphBatch cb2 = make_batch(two);
  EXPECT_THROW(dual.forward(tape, fb, &cb2), ConfigError);
  EXPECT_EQ(dual.forward(tape, fb, &cb).dims(), (Shape{1, 2}));
}

TEST(Model, MatchesDoubleReferenceOnBothModalities) {
  Rng rng(4);
  for (Modality mod : {Modality::fc_only, Modality::fc_plus_flat, Modality::fc_plus_2d}) {
    const LayerGraph fc = testing::random_fc_graph(rng, 8, FeatureSet::gcn16b);
    const Tensor w = random_tensor({3, 2, 3, 3}, rng, 0.5);
    const LayerGraph conv = mod == Modality::fc_plus_2d ? build_conv_2d(w) : build_conv_flat(w);
    GcnModel m({mod, FeatureSet::gcn16b, 16, mod == Modality::fc_only ? 0 : conv.feature_width()}, 9);
    for (Tensor t : m.parameters())
      for (float& x : t.mutable_values()) x += static_cast<float>(rng.normal(0, 0.05));
    const GraphBatch fb = make_batch(fc), cb = make_batch(conv);
    Tape tape;
    const Tensor z = m.forward(tape, fb, mod == Modality::fc_only ? nullptr : &cb);
    const auto rc = testing::ref_graph(conv);
    const auto want = testing::ref_logits(testing::ref_model(m), testing::ref_graph(fc),
                                          mod == Modality::fc_only ? nullptr : &rc);
    EXPECT_NEAR(z.values()[0], want[0], 1e-4);
    EXPECT_NEAR(z.values()[1], want[1], 1e-4);
  }
}

TEST(Model, GradientsMatchFiniteDifferences) {
  const auto fx = testing::gradient_fixture(1);
  const std::vector<LayerGraph> fc{fx.fc}, conv{fx.conv};
  const std::vector<int> labels{1};
  const testing::GradientCheck r = testing::check_model_gradients(fx.model, fc, conv, labels);
  EXPECT_EQ(fx.fc.num_nodes, 6u);
  EXPECT_EQ(fx.conv.num_nodes, 8u);
  EXPECT_EQ(r.kinks, 0u);
  EXPECT_EQ(r.parameters, 35970u);
  EXPECT_LE(r.max_rel_error, 1e-4) << r.worst << " engine " << r.engine_at_worst << " numeric "
                                   << r.numeric_at_worst;
}

TEST(Model, PermutedGraphGivesSameLogits) {
  Rng rng(5);
  GcnModel m({Modality::fc_only, FeatureSet::gcn16b, 16, 0}, 2);
  for (int trial = 0; trial < 5; ++trial) {
    const LayerGraph g = build_fc_bipartite(random_tensor({10, 64}, rng, 0.1), FeatureConfig::of(FeatureSet::gcn16b));
    const LayerGraph p = random_pair_swaps(g, 1000, trial);
    Tape tape;
    const auto a = vals(m.forward(tape, make_batch(g)));
    const auto b = vals(m.forward(tape, make_batch(p)));
    EXPECT_NEAR(a[0], b[0], 1e-5);
    EXPECT_NEAR(a[1], b[1], 1e-5);
  }
}

TEST(Model, LogitsFiniteForLargeParameters) {
  Rng rng(6);
  GcnModel m({Modality::fc_plus_flat, FeatureSet::gcn16b, 16, 4}, 2);
  for (Tensor t : m.parameters())
    for (float& x : t.mutable_values()) x = static_cast<float>(rng.uniform(-10, 10));
  const LayerGraph fc = testing::random_fc_graph(rng, 8, FeatureSet::gcn16b);
  const LayerGraph conv = build_conv_flat(random_tensor({4, 1, 2, 2}, rng));
  const GraphBatch fb = make_batch(fc), cb = make_batch(conv);
  Tape tape;
  for (float z : m.forward(tape, fb, &cb).values()) EXPECT_TRUE(std::isfinite(z));
}

TEST(Predict, SoftmaxClosedForms) {
  const Prediction a = prediction_from_logits(0.2f, 2.2f);
  EXPECT_EQ(a.label, Label::trojaned);
  EXPECT_NEAR(a.probabilities[1], 1 / (1 + std::exp(-2.0)), 1e-6);
  EXPECT_NEAR(a.probabilities[1], 0.8808, 1e-4);
  EXPECT_EQ(prediction_from_logits(5, 5).label, Label::clean);
  const Prediction c = prediction_from_logits(3, -3);
  EXPECT_EQ(c.label, Label::clean);
  EXPECT_NEAR(c.probabilities[0], 1 / (1 + std::exp(-6.0)), 1e-9);
  EXPECT_NEAR(c.probabilities[0], 0.9975, 1e-4);
}

TEST(Predict, RequiresTrainedOrLoadedModel) {
  GcnModel m({Modality::fc_only, FeatureSet::gcn5, 5, 0}, 1);
  const LayerGraph g = build_fc_bipartite(Tensor::matrix(1, 1, {0.3f}), FeatureConfig::of(FeatureSet::gcn5));
  EXPECT_THROW(predict(m, g), StateError);
  m.mark_trained();
  EXPECT_NO_THROW(predict(m, g));
}

TEST(Checkpoint, RoundTripsBitExactly) {
  testing::TempDir dir;
  Rng rng(7);
  GcnModel m({Modality::fc_plus_2d, FeatureSet::gcn18, 18, 1}, 11);
  m.save(dir / "model.dwb");
  const GcnModel back = GcnModel::load(dir / "model.dwb");
  EXPECT_EQ(back.state(), ModelState::loaded);
  EXPECT_EQ(back.config().modality, Modality::fc_plus_2d);
  EXPECT_EQ(back.config().features, FeatureSet::gcn18);
  EXPECT_EQ(back.config().fc_input_width, 18u);
  const auto pa = m.parameters(), pb = back.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(vals(pa[i]), vals(pb[i]));
  EXPECT_EQ(back.encode(), m.encode());

  const auto names = decode_container(m.encode());
  EXPECT_EQ(names.front().name, "branchfc.l1.W");
  EXPECT_EQ(names.back().name, "config");
}

TEST(Checkpoint, RejectsBrokenFiles) {
  GcnModel m({Modality::fc_only, FeatureSet::gcn16b, 16, 0}, 1);
  auto raw = decode_container(m.encode());
  auto without = [&](const std::string& name) {
    std::vector<RawTensor> out;
    for (const auto& t : raw)
      if (t.name != name) out.push_back(t);
    return encode_container(out);
  };
  EXPECT_THROW(GcnModel::decode(without("config")), ParseError);
  EXPECT_THROW(GcnModel::decode(without("head.bias")), ParseError);
  auto bad = raw;
  bad.back().words[0] = 3;
  EXPECT_THROW(GcnModel::decode(encode_container(bad)), ParseError);
  bad = raw;
  bad.back().words[4] = 1;  // dual modality on a single-branch arity
  EXPECT_THROW(GcnModel::decode(encode_container(bad)), ParseError);
  bad = raw;
  bad.back().words[1] = 7;  // input width disagrees with stored tensors
  EXPECT_THROW(GcnModel::decode(encode_container(bad)), ParseError);
}

TEST(Modality, Names) {
  EXPECT_EQ(parse_modality("fc_plus_flat"), Modality::fc_plus_flat);
  EXPECT_EQ(modality_name(Modality::fc_plus_2d), "fc_plus_2d");
  EXPECT_THROW(parse_modality("conv_only"), ConfigError);
}

}  // namespace
}  // namespace debugcn
