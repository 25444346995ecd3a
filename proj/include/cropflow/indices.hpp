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
#include <string_view>

#include "cropflow/series.hpp"

namespace cropflow {

enum class IndexKind { NDVI, EVI, GCVI, LSWI, NDWI, NDTI, MSI, SARRatio };

inline constexpr std::array<IndexKind, 6> kVegetationIndices = {
    IndexKind::NDVI, IndexKind::EVI, IndexKind::GCVI,
    IndexKind::LSWI, IndexKind::NDWI, IndexKind::NDTI};

std::string_view index_name(IndexKind kind);
std::optional<IndexKind> parse_index(std::string_view name);
bool is_sar_index(IndexKind kind);

// Band values available at one time step.
struct StepInputs {
  std::optional<BandValues> optical;
  std::optional<double> vv_db;
  std::optional<double> vh_db;
};

// Counts steps whose ratio denominator was (near) zero and reported as 0.
struct IndexWarnings {
  std::size_t degenerate = 0;
};

// Throws MissingBand when the kind needs a band that is absent.
double compute_index(IndexKind kind, const StepInputs& in,
                     IndexWarnings* warnings = nullptr);

// Appends one channel per kind, in order, computed from the series' own
// channels (BLUE..SWIR2, VV, VH).
RegularSeries augment_channels(const RegularSeries& series,
                               std::span<const IndexKind> kinds,
                               IndexWarnings* warnings = nullptr);

}  // namespace cropflow
