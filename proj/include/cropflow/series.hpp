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

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cropflow {

// Optical reflectance bands in canonical order.
enum class Band : std::size_t { Blue = 0, Green, Red, Nir, Swir1, Swir2 };
inline constexpr std::size_t kNumBands = 6;
using BandValues = std::array<double, kNumBands>;

// Channel header names of the optical bands, in Band order.
inline constexpr std::array<std::string_view, kNumBands> kBandNames = {
    "BLUE", "GREEN", "RED", "NIR", "SWIR1", "SWIR2"};
inline constexpr std::string_view kVvName = "VV";
inline constexpr std::string_view kVhName = "VH";

constexpr double band(const BandValues& v, Band b) {
  return v[static_cast<std::size_t>(b)];
}

struct SpectralObservation {
  int doy = 1;
  BandValues bands{};
  bool qa_valid = true;
};

struct SarObservation {
  int doy = 1;
  double vv_db = 0.0;
  double vh_db = 0.0;
};

struct ObservationSeries {
  std::string pixel_id;
  std::vector<SpectralObservation> observations;  // strictly increasing doy
  std::vector<SarObservation> sar;                // strictly increasing doy
  // Reflectances seen outside [0, 1] (kept, clamped to [-0.2, 1.2]).
  std::size_t range_warnings = 0;
};

// Validates and canonicalizes raw observations: sorts by doy, resolves
// duplicate dates (a clear observation beats a flagged one, otherwise the
// first wins), clamps reflectance to [-0.2, 1.2] counting values outside
// [0, 1]. Throws Parse on doy outside 1..366 or non-finite values, and
// AllMasked when there is neither an optical nor a SAR observation.
ObservationSeries make_series(std::string pixel_id,
                              std::vector<SpectralObservation> observations,
                              std::vector<SarObservation> sar = {});

enum class ClassLabel : int { Corn = 0, Soybean = 1, Other = 2 };
inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses = {
    ClassLabel::Corn, ClassLabel::Soybean, ClassLabel::Other};

std::string_view class_name(ClassLabel label);
std::optional<ClassLabel> parse_class(std::string_view name);
constexpr int class_index(ClassLabel label) { return static_cast<int>(label); }

struct SeasonWindow {
  int start_doy = 111;
  int end_doy = 265;

  void validate() const;
  bool contains(int doy) const { return doy >= start_doy && doy <= end_doy; }
};

// April 21 .. September 22 (non-leap).
inline constexpr SeasonWindow kGrowingSeason{111, 265};

// ---- Regular series -------------------------------------------------------

enum class Method { Raw, WeightedWE, LN7, LN30, LN7Smoothed, PhenoPeak };

std::string_view method_name(Method method);
std::optional<Method> parse_method(std::string_view name);

struct RegularGrid {
  int start_doy = 111;
  int interval_days = 7;
  std::size_t steps = 23;

  void validate() const;
  int doy(std::size_t step) const {
    return start_doy + static_cast<int>(step) * interval_days;
  }
  std::vector<int> doys() const;
  // Grid of whole intervals from start to end inclusive.
  static RegularGrid spanning(int start_doy, int end_doy, int interval_days);
};

// A steps x channels matrix of finite values plus its time axis. For Raw and
// WeightedWE the time axis is the irregular nominal dates and `grid` is empty.
struct RegularSeries {
  std::string pixel_id;
  Method method = Method::Raw;
  std::optional<RegularGrid> grid;
  std::vector<int> doys;
  std::vector<std::string> channel_names;
  std::vector<double> values;  // row-major [step][channel]

  std::size_t steps() const { return doys.size(); }
  std::size_t channels() const { return channel_names.size(); }
  double at(std::size_t step, std::size_t channel) const {
    return values[step * channels() + channel];
  }
  double& at(std::size_t step, std::size_t channel) {
    return values[step * channels() + channel];
  }
  std::vector<double> channel(std::size_t c) const;
  std::optional<std::size_t> channel_index(std::string_view name) const;

  // Throws ShapeMismatch / Parse when dimensions disagree or a value is not
  // finite.
  void validate() const;
};

std::vector<std::string> optical_channel_names();

// ---- series-core operations ----------------------------------------------

// Keeps clear observations only; SAR untouched. Throws AllMasked when none
// remain.
ObservationSeries mask_noise(const ObservationSeries& series);

// Positional raw path: clear observations inside the window, truncated to the
// first target_len or padded by repeating the last value.
RegularSeries raw_window(const ObservationSeries& series, SeasonWindow window,
                         std::size_t target_len);

// Dataset-level acquisition grid: sorted DOYs (inside the window) on which at
// least `min_fraction` of pixels hold a clear observation.
std::vector<int> common_acquisition_grid(
    std::span<const ObservationSeries> dataset, SeasonWindow window,
    double min_fraction = 0.5);

// Raw path on a shared grid: each grid date takes the pixel's clear value on
// that date, else the latest earlier clear value in the window, else the
// earliest one. Off-grid observations are dropped.
RegularSeries raw_on_grid(const ObservationSeries& series, SeasonWindow window,
                          std::span<const int> grid_doys);

}  // namespace cropflow
