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

#include "cropflow/series.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "cropflow/error.hpp"

namespace cropflow {

namespace {

void check_doy(int doy) {
  if (doy < 1 || doy > 366) {
    throw Error(ErrorKind::Parse, "day of year out of range: " + std::to_string(doy));
  }
}

}  // namespace

ObservationSeries make_series(std::string pixel_id,
                              std::vector<SpectralObservation> observations,
                              std::vector<SarObservation> sar) {
  ObservationSeries out;
  out.pixel_id = std::move(pixel_id);
  if (observations.empty() && sar.empty()) {
    throw Error(ErrorKind::AllMasked, "pixel " + out.pixel_id + " has no observations");
  }

  std::stable_sort(observations.begin(), observations.end(),
                   [](const auto& a, const auto& b) { return a.doy < b.doy; });
  for (auto& obs : observations) {
    check_doy(obs.doy);
    for (double& v : obs.bands) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::Parse, "non-finite reflectance in pixel " + out.pixel_id);
      }
      if (v < 0.0 || v > 1.0) {
        ++out.range_warnings;
        v = std::clamp(v, -0.2, 1.2);
      }
    }
    if (!out.observations.empty() && out.observations.back().doy == obs.doy) {
      // Same date twice: a clear observation replaces a flagged one.
      if (!out.observations.back().qa_valid && obs.qa_valid) {
        out.observations.back() = obs;
      }
      continue;
    }
    out.observations.push_back(obs);
  }

  std::stable_sort(sar.begin(), sar.end(),
                   [](const auto& a, const auto& b) { return a.doy < b.doy; });
  for (const auto& s : sar) {
    check_doy(s.doy);
    if (!std::isfinite(s.vv_db) || !std::isfinite(s.vh_db)) {
      throw Error(ErrorKind::Parse, "non-finite backscatter in pixel " + out.pixel_id);
    }
    if (!out.sar.empty() && out.sar.back().doy == s.doy) continue;
    out.sar.push_back(s);
  }
  return out;
}

std::string_view class_name(ClassLabel label) {
  switch (label) {
    case ClassLabel::Corn: return "Corn";
    case ClassLabel::Soybean: return "Soybean";
    case ClassLabel::Other: return "Other";
  }
  return "Other";
}

std::optional<ClassLabel> parse_class(std::string_view name) {
  if (name == "Corn" || name == "corn" || name == "0") return ClassLabel::Corn;
  if (name == "Soybean" || name == "soybean" || name == "1") return ClassLabel::Soybean;
  if (name == "Other" || name == "other" || name == "2") return ClassLabel::Other;
  return std::nullopt;
}

void SeasonWindow::validate() const {
  check_doy(start_doy);
  check_doy(end_doy);
  if (start_doy >= end_doy) {
    throw Error(ErrorKind::InvalidSpec, "season window start must precede end");
  }
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::Raw: return "raw";
    case Method::WeightedWE: return "we";
    case Method::LN7: return "ln7";
    case Method::LN30: return "ln30";
    case Method::LN7Smoothed: return "ln7we";
    case Method::PhenoPeak: return "peak";
  }
  return "raw";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::Raw, Method::WeightedWE, Method::LN7, Method::LN30,
                   Method::LN7Smoothed, Method::PhenoPeak}) {
    if (method_name(m) == name) return m;
  }
  return std::nullopt;
}

void RegularGrid::validate() const {
  if (interval_days < 1 || steps < 2 || start_doy < 1 ||
      doy(steps - 1) > 366) {
    throw Error(ErrorKind::InvalidSpec, "invalid regular grid");
  }
}

std::vector<int> RegularGrid::doys() const {
  std::vector<int> out(steps);
  for (std::size_t i = 0; i < steps; ++i) out[i] = doy(i);
  return out;
}

RegularGrid RegularGrid::spanning(int start_doy, int end_doy, int interval_days) {
  RegularGrid g{start_doy, interval_days,
                static_cast<std::size_t>((end_doy - start_doy) / interval_days) + 1};
  g.validate();
  return g;
}

std::vector<double> RegularSeries::channel(std::size_t c) const {
  std::vector<double> out(steps());
  for (std::size_t t = 0; t < steps(); ++t) out[t] = at(t, c);
  return out;
}

std::optional<std::size_t> RegularSeries::channel_index(std::string_view name) const {
  for (std::size_t i = 0; i < channel_names.size(); ++i) {
    if (channel_names[i] == name) return i;
  }
  return std::nullopt;
}

void RegularSeries::validate() const {
  if (values.size() != steps() * channels()) {
    throw Error(ErrorKind::ShapeMismatch, "series " + pixel_id + " matrix size mismatch");
  }
  if (grid && grid->steps != steps()) {
    throw Error(ErrorKind::ShapeMismatch, "series " + pixel_id + " grid mismatch");
  }
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::Parse, "series " + pixel_id + " has a non-finite value");
    }
  }
}

std::vector<std::string> optical_channel_names() {
  return {kBandNames.begin(), kBandNames.end()};
}

ObservationSeries mask_noise(const ObservationSeries& series) {
  ObservationSeries out;
  out.pixel_id = series.pixel_id;
  out.sar = series.sar;
  out.range_warnings = series.range_warnings;
  for (const auto& obs : series.observations) {
    if (obs.qa_valid) out.observations.push_back(obs);
  }
  if (out.observations.empty()) {
    throw Error(ErrorKind::AllMasked, "pixel " + series.pixel_id + " has no clear observation");
  }
  return out;
}

namespace {

std::vector<const SpectralObservation*> clear_in_window(const ObservationSeries& series,
                                                        SeasonWindow window) {
  std::vector<const SpectralObservation*> kept;
  for (const auto& obs : series.observations) {
    if (obs.qa_valid && window.contains(obs.doy)) kept.push_back(&obs);
  }
  if (kept.empty()) {
    throw Error(ErrorKind::AllMasked,
                "pixel " + series.pixel_id + " has no clear observation in the window");
  }
  return kept;
}

RegularSeries empty_raw(const ObservationSeries& series) {
  RegularSeries out;
  out.pixel_id = series.pixel_id;
  out.method = Method::Raw;
  out.channel_names = optical_channel_names();
  return out;
}

}  // namespace

RegularSeries raw_window(const ObservationSeries& series, SeasonWindow window,
                         std::size_t target_len) {
  window.validate();
  if (target_len == 0) throw Error(ErrorKind::InvalidSpec, "target length must be positive");
  const auto kept = clear_in_window(series, window);
  RegularSeries out = empty_raw(series);
  out.values.reserve(target_len * kNumBands);
  for (std::size_t i = 0; i < target_len; ++i) {
    const auto* obs = kept[std::min(i, kept.size() - 1)];
    // Padded steps repeat the last date as well as its values.
    out.doys.push_back(obs->doy);
    out.values.insert(out.values.end(), obs->bands.begin(), obs->bands.end());
  }
  return out;
}

std::vector<int> common_acquisition_grid(std::span<const ObservationSeries> dataset,
                                         SeasonWindow window, double min_fraction) {
  window.validate();
  std::map<int, std::size_t> counts;
  for (const auto& s : dataset) {
    for (const auto& obs : s.observations) {
      if (obs.qa_valid && window.contains(obs.doy)) ++counts[obs.doy];
    }
  }
  std::vector<int> grid;
  const double need = min_fraction * static_cast<double>(dataset.size());
  for (const auto& [doy, n] : counts) {
    if (static_cast<double>(n) >= need) grid.push_back(doy);
  }
  return grid;
}

RegularSeries raw_on_grid(const ObservationSeries& series, SeasonWindow window,
                          std::span<const int> grid_doys) {
  window.validate();
  if (grid_doys.empty()) throw Error(ErrorKind::InvalidSpec, "empty acquisition grid");
  const auto kept = clear_in_window(series, window);
  RegularSeries out = empty_raw(series);
  out.doys.assign(grid_doys.begin(), grid_doys.end());
  out.values.reserve(grid_doys.size() * kNumBands);
  std::size_t j = 0;
  for (int doy : grid_doys) {
    while (j + 1 < kept.size() && kept[j + 1]->doy <= doy) ++j;
    // kept[j] is the latest clear value at or before doy, or the earliest one.
    const auto* obs = kept[j];
    out.values.insert(out.values.end(), obs->bands.begin(), obs->bands.end());
  }
  return out;
}

}  // namespace cropflow
