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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cropflow/parallel.hpp"
#include "cropflow/series.hpp"

namespace cropflow {

struct DtwConfig {
  // Sakoe-Chiba radius; unbounded when empty. Widened to |len(a) - len(b)|
  // so the end cell stays reachable.
  std::optional<std::size_t> window;
};

// Minimal summed |a_i - b_j| over monotone warping paths from (0, 0) to
// (|a|-1, |b|-1) with steps right, down and diagonal. No length
// normalization. Throws EmptySequence.
double dtw_distance(std::span<const double> a, std::span<const double> b,
                    const DtwConfig& cfg = {});

// Mean DTW over all unordered pairs within `a` (when `b` is empty) or over
// all pairs a x b. Pair distances are summed in a fixed order.
double mean_pairwise_dtw(std::span<const std::vector<double>> a,
                         std::span<const std::vector<double>> b, const DtwConfig& cfg,
                         Exec exec = Exec::Parallel);

struct BandSeparability {
  std::string band;
  double intra_corn = 0.0;
  double intra_soy = 0.0;
  double inter = 0.0;
  bool separable = false;
};

struct SeparabilityReport {
  std::string method;
  std::vector<BandSeparability> bands;
  std::size_t separable_band_count = 0;
};

// Draws up to `max_per_class` series per class (after ordering by pixel id)
// and compares the per-band means; a band is separable when the inter-class
// mean exceeds both intra-class means. Throws TooFewSamples below 2 per class.
SeparabilityReport separability_report(std::span<const RegularSeries> corn,
                                       std::span<const RegularSeries> soy,
                                       const DtwConfig& cfg, std::uint64_t seed,
                                       std::size_t max_per_class = 100,
                                       Exec exec = Exec::Parallel);

// CSV columns: method,band,intra_corn,intra_soy,inter,separable_count
void write_separability_csv(std::ostream& out, std::span<const SeparabilityReport> reports);

}  // namespace cropflow
