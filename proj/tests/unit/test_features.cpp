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

#include "debugcn/error.hpp"
#include "debugcn/features.hpp"
#include "debugcn/random.hpp"
#include "feature_oracle.hpp"

namespace debugcn {
namespace {

using testing::brute_features;
using testing::brute_histogram;

TEST(Features, HandEvaluatedSevenWide) {
  const float w[] = {1, 2, 3};
  EXPECT_EQ(compute_node_features(w, Side::left, FeatureConfig::of(FeatureSet::gcn7)),
            (std::vector<float>{1, 0, 2, 1, 3, 6, 3}));
  EXPECT_EQ(compute_node_features(w, Side::right, FeatureConfig::of(FeatureSet::gcn7))[1], 1.0f);
}

TEST(Features, EqualWidthHistogram) {
  const float w[] = {0, 1, 2, 3, 4};
  const Histogram h = histogram(w);
  EXPECT_EQ(h.counts, (std::array<std::size_t, 5>{1, 1, 1, 1, 1}));
  const double want[] = {0, 0.8, 1.6, 2.4, 3.2, 4.0};
  for (int i = 0; i < 6; ++i) EXPECT_NEAR(h.bounds[i], want[i], 1e-12);
}

TEST(Features, DegenerateHistogramPutsEverythingInFirstBin) {
  const float w[] = {5, 5};
  const Histogram h = histogram(w);
  EXPECT_EQ(h.counts, (std::array<std::size_t, 5>{2, 0, 0, 0, 0}));
  for (double b : h.bounds) EXPECT_EQ(b, 5.0);
}

TEST(Features, MaximumLandsInLastBinAndBoundsValuesGoUp) {
  const float w[] = {0, 5, 10};
  const Histogram h = histogram(w);
  // bounds 0, 2, 4, 6, 8, 10
  EXPECT_EQ(h.counts, (std::array<std::size_t, 5>{1, 0, 1, 0, 1}));
  const float edge[] = {0, 2, 10};
  EXPECT_EQ(histogram(edge).counts, (std::array<std::size_t, 5>{1, 1, 0, 0, 1}));
}

TEST(Features, DeclaredWidths) {
  const std::pair<const char*, std::size_t> table[] = {
      {"GCN_5", 5}, {"GCN_7", 7}, {"GCN_16a", 16}, {"GCN_16b", 16}, {"GCN_18", 18}};
  const float w[] = {0.5f, -1.0f, 2.0f};
  for (const auto& [name, width] : table) {
    const FeatureConfig c = FeatureConfig::named(name);
    EXPECT_EQ(c.name(), name);
    EXPECT_EQ(c.width(), width);
    EXPECT_EQ(compute_node_features(w, Side::left, c).size(), width);
  }
  EXPECT_THROW(FeatureConfig::named("GCN_linegraph"), ConfigError);
  EXPECT_THROW(FeatureConfig::named("gcn_5"), ConfigError);
}

TEST(Features, EmptyIncidentSetIsDegenerate) {
  EXPECT_THROW(compute_node_features({}, Side::left, FeatureConfig::of(FeatureSet::gcn18)),
               ValidationError);
}

TEST(Features, SixteenBLayout) {
  const float w[] = {-1, 0, 3};
  const auto f = compute_node_features(w, Side::right, FeatureConfig::of(FeatureSet::gcn16b));
  ASSERT_EQ(f.size(), 16u);
  EXPECT_EQ(f[0], 1.0f);
  EXPECT_FLOAT_EQ(f[1], 2.0f / 3.0f);
  EXPECT_EQ(f[2], -1.0f);
  EXPECT_EQ(f[3], 3.0f);
  EXPECT_EQ(f[4], 2.0f);
  // bounds -1, -0.2, 0.6, 1.4, 2.2, 3
  EXPECT_EQ((std::vector<float>(f.begin() + 5, f.begin() + 10)), (std::vector<float>{1, 1, 0, 0, 1}));
  EXPECT_FLOAT_EQ(f[10], -1.0f);
  EXPECT_FLOAT_EQ(f[11], -0.2f);
  EXPECT_FLOAT_EQ(f[15], 3.0f);
}

TEST(Features, AgreesWithBruteForceOnRandomNodes) {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<float> w(n);
    const bool ties = rng.below(4) == 0;
    for (float& x : w)
      x = ties ? static_cast<float>(rng.below(3)) : static_cast<float>(rng.normal(0, 1 + rng.below(3)));
    const Side side = rng.below(2) ? Side::right : Side::left;
    const FeatureConfig c = FeatureConfig::of(FeatureSet::gcn18);
    const auto got = compute_node_features(w, side, c);
    const auto want = brute_features(w, side, c);
    ASSERT_EQ(got.size(), want.size());
    // const, side, min, max, counts, degree exact; mean, sum, bounds relative.
    for (std::size_t i : {0u, 1u, 3u, 4u, 6u, 7u, 8u, 9u, 10u, 17u}) EXPECT_EQ(got[i], static_cast<float>(want[i])) << i;
    for (std::size_t i : {2u, 5u, 11u, 12u, 13u, 14u, 15u, 16u})
      EXPECT_LE(std::abs(got[i] - want[i]), 1e-6 * std::max(1.0, std::abs(want[i]))) << i;
  }
}

TEST(Features, HistogramInvariants) {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<float> w(n);
    for (float& x : w) x = static_cast<float>(rng.normal());
    const Histogram h = histogram(w);
    std::size_t total = 0;
    for (auto c : h.counts) total += c;
    EXPECT_EQ(total, n);
    for (int i = 0; i < 5; ++i) EXPECT_LE(h.bounds[i], h.bounds[i + 1]);
    EXPECT_EQ(h.bounds[0], *std::min_element(w.begin(), w.end()));
    EXPECT_EQ(h.bounds[5], *std::max_element(w.begin(), w.end()));
    const auto brute = brute_histogram(w);
    EXPECT_EQ(h.counts, brute.counts);
  }
}

}  // namespace
}  // namespace debugcn
