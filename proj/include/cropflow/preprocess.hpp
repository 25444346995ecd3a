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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cropflow/indices.hpp"
#include "cropflow/parallel.hpp"
#include "cropflow/reconstruct.hpp"
#include "cropflow/series.hpp"
#include "json.hpp"

namespace cropflow {

// Input-variable combinations: spectral bands alone, or combined with the six
// vegetation/water indices, the three SAR channels, or both.
enum class ChannelSet { Optical, OpticalVI, OpticalSar, OpticalVISar };

std::string_view channel_set_name(ChannelSet set);
std::optional<ChannelSet> parse_channel_set(std::string_view name);
bool uses_sar(ChannelSet set);
std::vector<std::string> channel_names_for(ChannelSet set);

struct PreprocessSpec {
  Method method = Method::LN7;
  SmootherConfig smoother;
  ChannelSet channels = ChannelSet::Optical;
  SeasonWindow window = kGrowingSeason;
  std::size_t peak_half_width = kPeakHalfWidth;
  // Raw only: the common acquisition grid. Filled from the dataset by
  // preprocess_all when empty.
  std::vector<int> raw_grid;
};

// Keys: method, channels, lambda, diff_order, weight_mode ("uniform" or
// "interval"), revisit_days, window [start, end], peak_half_width, raw_grid.
// Missing keys keep their defaults; unknown keys throw Config.
nlohmann::json preprocess_spec_to_json(const PreprocessSpec& spec);
PreprocessSpec preprocess_spec_from_json(const nlohmann::json& j);

// One pixel through mask -> reconstruct -> channel augmentation.
RegularSeries preprocess_pixel(const ObservationSeries& series, const PreprocessSpec& spec,
                               IndexWarnings* warnings = nullptr);

std::vector<RegularSeries> preprocess_all(std::span<const ObservationSeries> pixels,
                                          PreprocessSpec spec, Exec exec = Exec::Parallel);

}  // namespace cropflow
