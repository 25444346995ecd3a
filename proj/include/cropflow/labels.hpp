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
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cropflow/error.hpp"
#include "cropflow/io.hpp"
#include "cropflow/rng.hpp"
#include "cropflow/series.hpp"

namespace cropflow {

inline constexpr std::size_t kHistoryYears = 8;

// Yearly crop codes, oldest first; the last entry is the study year. "C" and
// "S" are reserved for corn and soybean.
struct CropHistory {
  std::string pixel_id;
  std::vector<std::string> codes;
};

// AnchorRelative: the off-years X may be any code other than the study-year
// crop (so C-S rotations qualify). StrictX: X must be neither C nor S.
enum class PatternMode { AnchorRelative, StrictX };

// Corn or Soybean when the history is eight years of one crop, or the crop
// alternates with X years ending on the crop in the study year; nullopt
// otherwise. Throws MalformedHistory unless there are exactly 8 entries.
std::optional<ClassLabel> classify_trusted(const CropHistory& history, PatternMode mode);

struct TrustedCounts {
  std::size_t trusted_corn = 0;
  std::size_t trusted_soy = 0;
  std::size_t cdl_corn = 0;
  std::size_t cdl_soy = 0;
  std::size_t cdl_other = 0;
};

struct TrustedRatio {
  double p_trusted = 0.0;
  TrustedCounts counts;
};

// p = (trusted corn + trusted soy) / (cdl corn + cdl soy). Throws
// ZeroDenominator when no corn or soybean pixel exists in the CDL counts.
TrustedRatio compute_trusted_ratio(const TrustedCounts& counts);

// round(p * n), halves rounded up.
std::size_t downsample_size(double p_trusted, std::size_t n);

// Uniform random subset of round(p * n) items without replacement,
// determined entirely by the seed.
template <typename T>
std::vector<T> downsample_other(const std::vector<T>& items, const TrustedRatio& ratio,
                                std::uint64_t seed) {
  const std::size_t k = downsample_size(ratio.p_trusted, items.size());
  Rng rng(seed);
  std::vector<std::size_t> idx(items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  // Partial Fisher-Yates: the first k slots become the sample.
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + rng.uniform_index(idx.size() - i)]);
  }
  std::vector<T> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(items[idx[i]]);
  return out;
}

struct TrustedLabelSet {
  std::vector<io::PixelLabel> labels;  // trusted corn/soy, then sampled other
  TrustedRatio ratio;
};

// Full trusted-label pass over extracted histories: CDL class is the study
// year code (C, S, anything else = Other).
TrustedLabelSet build_trusted_labels(std::span<const CropHistory> histories, PatternMode mode,
                                     std::uint64_t seed);

// History CSV: pixel_id,y1,...,y8
std::vector<CropHistory> read_history_csv(std::istream& in);
std::vector<CropHistory> read_history_csv(const std::filesystem::path& path);
void write_history_csv(std::ostream& out, std::span<const CropHistory> histories);

}  // namespace cropflow
