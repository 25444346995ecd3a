// Copyright 2026 The Cropflow Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <utility>

#include "cropflow/error.hpp"
#include "cropflow/indices.hpp"
#include "cropflow/rng.hpp"
#include "index_cases.hpp"

namespace cropflow {
namespace {

TEST(Indices, HandWorkedCases) {
  for (const auto& c : testing::hand_index_cases()) {
    EXPECT_NEAR(compute_index(c.kind, c.in), c.expected, 1e-12) << c.name;
  }
}

TEST(Indices, NormalizedDifferencesAreBounded) {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    BandValues b;
    for (double& v : b) v = rng.uniform(1e-6, 1.0);
    const StepInputs in{b, std::nullopt, std::nullopt};
    for (IndexKind k : {IndexKind::NDVI, IndexKind::LSWI, IndexKind::NDWI, IndexKind::NDTI}) {
      const double v = compute_index(k, in);
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Indices, NdviAntisymmetry) {
  Rng rng(2);
  for (int i = 0; i < 1000; ++i) {
    BandValues b;
    for (double& v : b) v = rng.uniform(0.01, 1.0);
    BandValues s = b;
    std::swap(s[2], s[3]);
    EXPECT_EQ(compute_index(IndexKind::NDVI, {b, {}, {}}),
              -compute_index(IndexKind::NDVI, {s, {}, {}}));
  }
}

TEST(Indices, DegenerateDenominatorGivesZeroAndCounts) {
  IndexWarnings w;
  const StepInputs zero{BandValues{}, std::nullopt, std::nullopt};
  EXPECT_EQ(compute_index(IndexKind::NDVI, zero, &w), 0.0);
  EXPECT_EQ(compute_index(IndexKind::GCVI, zero, &w), 0.0);
  EXPECT_EQ(compute_index(IndexKind::MSI, zero, &w), 0.0);
  EXPECT_EQ(w.degenerate, 3u);
}

TEST(Indices, MissingBandsThrow) {
  EXPECT_THROW(compute_index(IndexKind::NDVI, {std::nullopt, -10.0, -16.0}), Error);
  EXPECT_THROW(compute_index(IndexKind::SARRatio, {BandValues{}, std::nullopt, std::nullopt}),
               Error);
}

RegularSeries optical_series(std::size_t steps) {
  RegularSeries s;
  s.pixel_id = "p";
  s.method = Method::LN7;
  s.channel_names = optical_channel_names();
  Rng rng(5);
  for (std::size_t t = 0; t < steps; ++t) {
    s.doys.push_back(111 + 7 * static_cast<int>(t));
    for (std::size_t c = 0; c < kNumBands; ++c) s.values.push_back(rng.uniform(0.01, 0.6));
  }
  return s;
}

TEST(Augment, EmptyKindsIsIdentity) {
  const auto s = optical_series(23);
  const auto a = augment_channels(s, {});
  EXPECT_EQ(a.values, s.values);
  EXPECT_EQ(a.channel_names, s.channel_names);
}

TEST(Augment, AppendsInRequestedOrderAndKeepsOriginals) {
  const auto s = optical_series(23);
  const auto one = augment_channels(s, std::vector{IndexKind::NDVI});
  EXPECT_EQ(one.channels(), 7u);
  EXPECT_EQ(one.steps(), 23u);
  const auto all = augment_channels(s, kVegetationIndices);
  const std::vector<std::string> names = {"BLUE", "GREEN", "RED",  "NIR",  "SWIR1", "SWIR2",
                                          "NDVI", "EVI",   "GCVI", "LSWI", "NDWI",  "NDTI"};
  EXPECT_EQ(all.channel_names, names);
  for (std::size_t t = 0; t < 23; ++t) {
    for (std::size_t c = 0; c < kNumBands; ++c) EXPECT_EQ(all.at(t, c), s.at(t, c));
    BandValues b;
    for (std::size_t c = 0; c < kNumBands; ++c) b[c] = s.at(t, c);
    EXPECT_EQ(all.at(t, 6), compute_index(IndexKind::NDVI, {b, {}, {}}));
  }
}

TEST(Augment, SarRatioNeedsSarChannels) {
  const auto s = optical_series(4);
  EXPECT_THROW(augment_channels(s, std::vector{IndexKind::SARRatio}), Error);
}

}  // namespace
}  // namespace cropflow
