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

#include "cropflow/indices.hpp"

#include <cmath>
#include <string>

#include "cropflow/error.hpp"

namespace cropflow {

namespace {

constexpr double kDenominatorFloor = 1e-9;

double guarded_ratio(double num, double den, IndexWarnings* warnings) {
  if (std::abs(den) < kDenominatorFloor) {
    if (warnings) ++warnings->degenerate;
    return 0.0;
  }
  return num / den;
}

double normalized_difference(double a, double b, IndexWarnings* warnings) {
  return guarded_ratio(a - b, a + b, warnings);
}

const BandValues& need_optical(const StepInputs& in, IndexKind kind) {
  if (!in.optical) {
    throw Error(ErrorKind::MissingBand,
                std::string(index_name(kind)) + " needs the optical bands");
  }
  return *in.optical;
}

}  // namespace

std::string_view index_name(IndexKind kind) {
  switch (kind) {
    case IndexKind::NDVI: return "NDVI";
    case IndexKind::EVI: return "EVI";
    case IndexKind::GCVI: return "GCVI";
    case IndexKind::LSWI: return "LSWI";
    case IndexKind::NDWI: return "NDWI";
    case IndexKind::NDTI: return "NDTI";
    case IndexKind::MSI: return "MSI";
    case IndexKind::SARRatio: return "SARRatio";
  }
  return "NDVI";
}

std::optional<IndexKind> parse_index(std::string_view name) {
  for (IndexKind k : {IndexKind::NDVI, IndexKind::EVI, IndexKind::GCVI, IndexKind::LSWI,
                      IndexKind::NDWI, IndexKind::NDTI, IndexKind::MSI, IndexKind::SARRatio}) {
    if (index_name(k) == name) return k;
  }
  return std::nullopt;
}

bool is_sar_index(IndexKind kind) { return kind == IndexKind::SARRatio; }

double compute_index(IndexKind kind, const StepInputs& in, IndexWarnings* warnings) {
  if (kind == IndexKind::SARRatio) {
    if (!in.vv_db || !in.vh_db) {
      throw Error(ErrorKind::MissingBand, "SARRatio needs VV and VH");
    }
    // dB -> linear power, then VH/VV.
    const double vv = std::pow(10.0, *in.vv_db / 10.0);
    const double vh = std::pow(10.0, *in.vh_db / 10.0);
    return guarded_ratio(vh, vv, warnings);
  }

  const BandValues& b = need_optical(in, kind);
  const double blue = band(b, Band::Blue);
  const double green = band(b, Band::Green);
  const double red = band(b, Band::Red);
  const double nir = band(b, Band::Nir);
  const double swir1 = band(b, Band::Swir1);
  switch (kind) {
    case IndexKind::NDVI:
      return normalized_difference(nir, red, warnings);
    case IndexKind::EVI:
      return guarded_ratio(2.5 * (nir - red), nir + 6.0 * red - 7.5 * blue + 1.0, warnings);
    case IndexKind::GCVI:
      if (std::abs(green) < kDenominatorFloor) return guarded_ratio(nir, green, warnings);
      return nir / green - 1.0;
    case IndexKind::LSWI:
      return normalized_difference(nir, swir1, warnings);
    case IndexKind::NDWI:
      return normalized_difference(red, swir1, warnings);
    case IndexKind::NDTI:
      return normalized_difference(red, green, warnings);
    case IndexKind::MSI:
      return guarded_ratio(swir1, nir, warnings);
    case IndexKind::SARRatio:
      break;
  }
  return 0.0;
}

RegularSeries augment_channels(const RegularSeries& series, std::span<const IndexKind> kinds,
                               IndexWarnings* warnings) {
  if (kinds.empty()) return series;

  std::array<std::optional<std::size_t>, kNumBands> band_idx;
  bool has_optical = true;
  for (std::size_t b = 0; b < kNumBands; ++b) {
    band_idx[b] = series.channel_index(kBandNames[b]);
    has_optical = has_optical && band_idx[b].has_value();
  }
  const auto vv_idx = series.channel_index(kVvName);
  const auto vh_idx = series.channel_index(kVhName);

  const std::size_t old_c = series.channels();
  const std::size_t new_c = old_c + kinds.size();
  RegularSeries out = series;
  for (IndexKind k : kinds) out.channel_names.emplace_back(index_name(k));
  out.values.assign(series.steps() * new_c, 0.0);

  for (std::size_t t = 0; t < series.steps(); ++t) {
    StepInputs in;
    if (has_optical) {
      BandValues b{};
      for (std::size_t c = 0; c < kNumBands; ++c) b[c] = series.at(t, *band_idx[c]);
      in.optical = b;
    }
    if (vv_idx && vh_idx) {
      in.vv_db = series.at(t, *vv_idx);
      in.vh_db = series.at(t, *vh_idx);
    }
    double* row = out.values.data() + t * new_c;
    for (std::size_t c = 0; c < old_c; ++c) row[c] = series.at(t, c);
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      row[old_c + k] = compute_index(kinds[k], in, warnings);
    }
  }
  return out;
}

}  // namespace cropflow
