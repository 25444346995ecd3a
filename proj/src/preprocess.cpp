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

#include "cropflow/preprocess.hpp"

#include "cropflow/error.hpp"

namespace cropflow {

std::string_view channel_set_name(ChannelSet set) {
  switch (set) {
    case ChannelSet::Optical: return "optical";
    case ChannelSet::OpticalVI: return "optical+vi";
    case ChannelSet::OpticalSar: return "optical+sar";
    case ChannelSet::OpticalVISar: return "optical+vi+sar";
  }
  return "optical";
}

std::optional<ChannelSet> parse_channel_set(std::string_view name) {
  for (ChannelSet s : {ChannelSet::Optical, ChannelSet::OpticalVI, ChannelSet::OpticalSar,
                       ChannelSet::OpticalVISar}) {
    if (channel_set_name(s) == name) return s;
  }
  return std::nullopt;
}

bool uses_sar(ChannelSet set) {
  return set == ChannelSet::OpticalSar || set == ChannelSet::OpticalVISar;
}

namespace {

bool uses_vi(ChannelSet set) {
  return set == ChannelSet::OpticalVI || set == ChannelSet::OpticalVISar;
}

}  // namespace

std::vector<std::string> channel_names_for(ChannelSet set) {
  auto names = optical_channel_names();
  if (uses_vi(set)) {
    for (IndexKind k : kVegetationIndices) names.emplace_back(index_name(k));
  }
  if (uses_sar(set)) {
    names.emplace_back(kVvName);
    names.emplace_back(kVhName);
    names.emplace_back(index_name(IndexKind::SARRatio));
  }
  return names;
}

RegularSeries preprocess_pixel(const ObservationSeries& series, const PreprocessSpec& spec,
                               IndexWarnings* warnings) {
  const ObservationSeries clear = mask_noise(series);
  RegularSeries out;
  switch (spec.method) {
    case Method::Raw:
      if (spec.raw_grid.empty()) {
        throw Error(ErrorKind::InvalidSpec, "raw preprocessing needs an acquisition grid");
      }
      out = raw_on_grid(clear, spec.window, spec.raw_grid);
      break;
    case Method::WeightedWE: {
      // Restrict to the season before smoothing on the native dates.
      ObservationSeries in_season = clear;
      std::erase_if(in_season.observations,
                    [&](const SpectralObservation& o) { return !spec.window.contains(o.doy); });
      out = whittaker_smooth(in_season, spec.smoother);
      break;
    }
    case Method::LN7:
      out = linear_resample(clear, grid_7day());
      break;
    case Method::LN30:
      out = linear_resample(clear, grid_30day());
      break;
    case Method::LN7Smoothed: {
      SmootherConfig uniform = spec.smoother;
      uniform.weight_mode = WeightMode::Uniform;
      out = resample_then_smooth(clear, grid_7day(), uniform);
      break;
    }
    case Method::PhenoPeak:
      out = pheno_peak_window(clear, spec.window, spec.peak_half_width);
      break;
  }

  if (uses_vi(spec.channels)) {
    out = augment_channels(out, kVegetationIndices, warnings);
  }
  if (uses_sar(spec.channels)) {
    const auto sar = sar_on_dates(clear, spec.smoother, out.doys);
    const std::size_t old_c = out.channels();
    std::vector<double> values(out.steps() * (old_c + 2));
    for (std::size_t t = 0; t < out.steps(); ++t) {
      for (std::size_t c = 0; c < old_c; ++c) values[t * (old_c + 2) + c] = out.at(t, c);
      values[t * (old_c + 2) + old_c] = sar[2 * t];
      values[t * (old_c + 2) + old_c + 1] = sar[2 * t + 1];
    }
    out.values = std::move(values);
    out.channel_names.emplace_back(kVvName);
    out.channel_names.emplace_back(kVhName);
    const IndexKind ratio[] = {IndexKind::SARRatio};
    out = augment_channels(out, ratio, warnings);
  }
  return out;
}

std::vector<RegularSeries> preprocess_all(std::span<const ObservationSeries> pixels,
                                          PreprocessSpec spec, Exec exec) {
  if (spec.method == Method::Raw && spec.raw_grid.empty()) {
    spec.raw_grid = common_acquisition_grid(pixels, spec.window);
  }
  std::vector<RegularSeries> out(pixels.size());
  for_each_index(pixels.size(), exec,
                 [&](std::size_t i) { out[i] = preprocess_pixel(pixels[i], spec); });
  return out;
}

nlohmann::json preprocess_spec_to_json(const PreprocessSpec& spec) {
  return {{"method", method_name(spec.method)},
          {"channels", channel_set_name(spec.channels)},
          {"lambda", spec.smoother.lambda},
          {"diff_order", spec.smoother.diff_order},
          {"weight_mode",
           spec.smoother.weight_mode == WeightMode::Uniform ? "uniform" : "interval"},
          {"revisit_days", spec.smoother.revisit_days},
          {"window", {spec.window.start_doy, spec.window.end_doy}},
          {"peak_half_width", spec.peak_half_width},
          {"raw_grid", spec.raw_grid}};
}

PreprocessSpec preprocess_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "preprocess config must be an object");
  PreprocessSpec spec;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "method") {
        const auto m = parse_method(value.get<std::string>());
        if (!m) throw Error(ErrorKind::Config, "unknown method " + value.dump());
        spec.method = *m;
      } else if (key == "channels") {
        const auto c = parse_channel_set(value.get<std::string>());
        if (!c) throw Error(ErrorKind::Config, "unknown channel set " + value.dump());
        spec.channels = *c;
      } else if (key == "lambda") {
        spec.smoother.lambda = value.get<double>();
      } else if (key == "diff_order") {
        spec.smoother.diff_order = value.get<int>();
      } else if (key == "weight_mode") {
        const auto w = value.get<std::string>();
        if (w != "uniform" && w != "interval") {
          throw Error(ErrorKind::Config, "weight_mode must be uniform or interval");
        }
        spec.smoother.weight_mode = w == "uniform" ? WeightMode::Uniform : WeightMode::IntervalAware;
      } else if (key == "revisit_days") {
        spec.smoother.revisit_days = value.get<double>();
      } else if (key == "window") {
        const auto w = value.get<std::vector<int>>();
        if (w.size() != 2) throw Error(ErrorKind::Config, "window needs [start, end]");
        spec.window = {w[0], w[1]};
      } else if (key == "peak_half_width") {
        spec.peak_half_width = value.get<std::size_t>();
      } else if (key == "raw_grid") {
        spec.raw_grid = value.get<std::vector<int>>();
      } else {
        throw Error(ErrorKind::Config, "unknown preprocess key: " + key);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("preprocess config: ") + e.what());
  }
  spec.smoother.validate();
  spec.window.validate();
  return spec;
}

}  // namespace cropflow
