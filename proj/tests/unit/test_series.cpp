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

#include <sstream>

#include "builders.hpp"
#include "cropflow/error.hpp"
#include "cropflow/io.hpp"
#include "cropflow/rng.hpp"
#include "cropflow/series.hpp"

namespace cropflow {
namespace {

using testing::obs;

ObservationSeries five(std::vector<bool> valid) {
  std::vector<SpectralObservation> o;
  for (int i = 0; i < static_cast<int>(valid.size()); ++i) {
    o.push_back(obs(120 + 10 * i, 0.1 * (i + 1), valid[static_cast<std::size_t>(i)]));
  }
  return make_series("p", o);
}

TEST(MaskNoise, AllValidIsIdentity) {
  const auto s = five({true, true, true, true, true});
  const auto m = mask_noise(s);
  ASSERT_EQ(m.observations.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(m.observations[i].doy, s.observations[i].doy);
}

TEST(MaskNoise, DropsFlaggedObservationKeepingOrder) {
  const auto m = mask_noise(five({true, true, false, true, true}));
  ASSERT_EQ(m.observations.size(), 4u);
  EXPECT_EQ(m.observations[1].doy, 130);
  EXPECT_EQ(m.observations[2].doy, 150);
}

TEST(MaskNoise, AllFlaggedThrows) {
  try {
    mask_noise(five({false, false, false}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AllMasked);
  }
}

TEST(MaskNoise, IdempotentAndLeavesSarAlone) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SpectralObservation> o;
    for (int d = 100; d < 200; d += 8) o.push_back(obs(d, rng.uniform(), rng.uniform() < 0.7));
    o.push_back(obs(250, 0.3, true));
    const auto s = make_series("r", o, {{101, -12.0, -18.0}, {107, -11.0, -17.0}});
    const auto once = mask_noise(s);
    const auto twice = mask_noise(once);
    EXPECT_LE(once.observations.size(), s.observations.size());
    ASSERT_EQ(once.observations.size(), twice.observations.size());
    for (const auto& x : once.observations) EXPECT_TRUE(x.qa_valid);
    EXPECT_EQ(once.sar.size(), 2u);
    EXPECT_EQ(once.sar[1].vh_db, -17.0);
  }
}

TEST(MakeSeries, SortsDedupsAndClamps) {
  const auto s = make_series("p", {obs(150, 0.2, false), obs(120, 0.1), obs(150, 0.3),
                                   obs(160, 1.5), obs(150, 0.9)});
  ASSERT_EQ(s.observations.size(), 3u);
  EXPECT_EQ(s.observations[1].doy, 150);
  // The clear observation replaces the flagged one on the same date; later
  // duplicates lose.
  EXPECT_TRUE(s.observations[1].qa_valid);
  EXPECT_EQ(s.observations[1].bands[0], 0.3);
  EXPECT_EQ(s.observations[2].bands[3], 1.2);
  EXPECT_EQ(s.range_warnings, 6u);
}

TEST(MakeSeries, RejectsBadDoy) {
  EXPECT_THROW(make_series("p", {obs(0, 0.1)}), Error);
  EXPECT_THROW(make_series("p", {obs(367, 0.1)}), Error);
}

std::vector<SpectralObservation> ramp(int n) {
  std::vector<SpectralObservation> o;
  for (int i = 0; i < n; ++i) {
    BandValues b{0.01 * i, 0.02 * i, 0.03 * i, 0.04 * i, 0.05 * i, 0.06 * i};
    o.push_back({120 + 10 * i, b, true});
  }
  return o;
}

TEST(RawWindow, ExactLengthIsIdentity) {
  const auto s = make_series("p", ramp(9));
  const auto r = raw_window(s, kGrowingSeason, 9);
  ASSERT_EQ(r.steps(), 9u);
  for (std::size_t t = 0; t < 9; ++t) {
    for (std::size_t c = 0; c < kNumBands; ++c) {
      EXPECT_EQ(r.at(t, c), s.observations[t].bands[c]);
    }
  }
  EXPECT_EQ(r.method, Method::Raw);
  EXPECT_EQ(r.channel_names, optical_channel_names());
}

TEST(RawWindow, PadsByHoldingLast) {
  const auto s = make_series("p", ramp(7));
  const auto r = raw_window(s, kGrowingSeason, 9);
  ASSERT_EQ(r.steps(), 9u);
  for (std::size_t c = 0; c < kNumBands; ++c) {
    EXPECT_EQ(r.at(7, c), s.observations[6].bands[c]);
    EXPECT_EQ(r.at(8, c), s.observations[6].bands[c]);
  }
}

TEST(RawWindow, TruncatesToFirst) {
  const auto s = make_series("p", ramp(12));
  const auto r = raw_window(s, kGrowingSeason, 9);
  ASSERT_EQ(r.steps(), 9u);
  EXPECT_EQ(r.doys.back(), s.observations[8].doy);
  EXPECT_EQ(r.at(8, 5), s.observations[8].bands[5]);
}

TEST(RawWindow, EmptyWindowThrows) {
  const auto s = make_series("p", {obs(50, 0.1), obs(300, 0.2)});
  EXPECT_THROW(raw_window(s, kGrowingSeason, 5), Error);
}

TEST(RawWindow, AlwaysTargetLength) {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(15));
    const std::size_t len = 1 + rng.uniform_index(12);
    EXPECT_EQ(raw_window(make_series("p", ramp(n)), kGrowingSeason, len).steps(), len);
  }
}

TEST(CommonGrid, KeepsDatesSeenInHalfThePixels) {
  const std::vector<ObservationSeries> ds = {
      make_series("a", {obs(120, 0.1), obs(136, 0.1), obs(150, 0.1)}),
      make_series("b", {obs(120, 0.1), obs(136, 0.1, false)}),
      make_series("c", {obs(120, 0.1), obs(150, 0.1), obs(300, 0.1)}),
      make_series("d", {obs(128, 0.1)}),
  };
  EXPECT_EQ(common_acquisition_grid(ds, kGrowingSeason), (std::vector<int>{120, 150}));
}

TEST(CommonGrid, FillsHoldFirstAtHeadAndHoldLastElsewhere) {
  const auto s = make_series("p", {obs(130, 0.1), obs(150, 0.2), obs(170, 0.3)});
  const std::vector<int> grid = {120, 130, 140, 170, 180};
  const auto r = raw_on_grid(s, kGrowingSeason, grid);
  ASSERT_EQ(r.steps(), 5u);
  const double expect[] = {0.1, 0.1, 0.1, 0.3, 0.3};
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(r.at(t, 2), expect[t]);
  EXPECT_EQ(r.doys, grid);
}

TEST(Grid, SeasonGridsHavePaperLengths) {
  EXPECT_EQ(RegularGrid::spanning(111, 265, 7).steps, 23u);
  EXPECT_EQ(RegularGrid::spanning(111, 265, 30).steps, 6u);
}

TEST(PixelCsv, RoundTrip) {
  const auto a = make_series("x_1", {obs(120, 0.125), obs(136, 0.25, false)},
                             {{121, -10.5, -17.25}});
  std::stringstream ss;
  const std::vector<ObservationSeries> v = {a};
  io::write_pixel_csv(ss, v);
  const auto back = io::read_pixel_csv(ss);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].pixel_id, "x_1");
  ASSERT_EQ(back[0].observations.size(), 2u);
  EXPECT_FALSE(back[0].observations[1].qa_valid);
  EXPECT_EQ(back[0].observations[1].bands[4], 0.25);
  ASSERT_EQ(back[0].sar.size(), 1u);
  EXPECT_EQ(back[0].sar[0].vh_db, -17.25);
}

TEST(PixelCsv, RejectsMalformedRows) {
  std::stringstream bad("pixel_id,doy,blue,green,red,nir,swir1,swir2,qa_valid\np,12x,1,1,1,1,1,1,1\n");
  EXPECT_THROW(io::read_pixel_csv(bad), Error);
}

}  // namespace
}  // namespace cropflow
