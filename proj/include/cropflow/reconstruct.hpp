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
#include <span>
#include <vector>

#include "cropflow/series.hpp"

namespace cropflow {

enum class WeightMode { Uniform, IntervalAware };

struct SmootherConfig {
  double lambda = 10.0;
  int diff_order = 2;
  WeightMode weight_mode = WeightMode::IntervalAware;
  // Nominal revisit interval g of the interval-aware weights, days.
  double revisit_days = 16.0;

  void validate() const;
};

// Standard grids: 7-day and 30-day over the growing season, and the extended
// April 1 .. October 1 grid searched by the phenological-peak method.
RegularGrid grid_7day();
RegularGrid grid_30day();
RegularGrid grid_peak_extended();
inline constexpr std::size_t kPeakHalfWidth = 11;

// Solves (W + lambda * D'D) z = W y with D the second-difference operator,
// via a banded LDL' factorization. Throws SingularSystem on a non-positive
// pivot (possible only when lambda == 0 and a weight is zero, or fewer than
// two distinct positive weights with lambda > 0).
std::vector<double> whittaker_solve(std::span<const double> y,
                                    std::span<const double> weights,
                                    double lambda);

// w_i = min(1, g / delta_i) where delta_i is half the sum of the gaps to
// both neighbours (the single gap at either end).
std::vector<double> interval_weights(std::span<const int> doys, double revisit_days);

// Piecewise-linear interpolation with nearest-value hold outside [x0, xn].
std::vector<double> interpolate_linear(std::span<const int> x,
                                       std::span<const double> y,
                                       std::span<const int> at);

// Smooths each optical band on the clear observation dates.
RegularSeries whittaker_smooth(const ObservationSeries& series,
                               const SmootherConfig& cfg);

RegularSeries linear_resample(const ObservationSeries& series, const RegularGrid& grid);

RegularSeries resample_then_smooth(const ObservationSeries& series,
                                   const RegularGrid& grid,
                                   const SmootherConfig& cfg);

// Where the peak window sits on the extended grid.
struct PeakWindow {
  std::size_t peak_step = 0;   // index of the NDVI maximum on the extended grid
  std::size_t first_step = 0;  // first extended-grid step of the output
};

// Locates the first maximal NDVI step whose date lies in `search`, then the
// 2*half_width+1 window centred on it, shifted inward at the grid edges.
PeakWindow locate_peak_window(std::span<const double> ndvi, std::span<const int> doys,
                              SeasonWindow search, std::size_t half_width);

RegularSeries pheno_peak_window(const ObservationSeries& series, SeasonWindow search,
                                std::size_t half_width = kPeakHalfWidth);

// SAR backscatter smoothed on its native dates, then interpolated onto
// `doys`. Returns steps x 2 values [vv_db, vh_db] row-major.
std::vector<double> sar_on_dates(const ObservationSeries& series,
                                 const SmootherConfig& cfg,
                                 std::span<const int> doys);

}  // namespace cropflow
