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

#include "cropflow/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cropflow/error.hpp"
#include "cropflow/indices.hpp"

namespace cropflow {

void SmootherConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw Error(ErrorKind::InvalidSpec, "smoother lambda must be finite and >= 0");
  }
  if (diff_order != 2) throw Error(ErrorKind::InvalidSpec, "smoother diff_order must be 2");
  if (!(revisit_days > 0.0)) throw Error(ErrorKind::InvalidSpec, "revisit_days must be > 0");
}

RegularGrid grid_7day() { return RegularGrid::spanning(111, 265, 7); }
RegularGrid grid_30day() { return RegularGrid::spanning(111, 265, 30); }
RegularGrid grid_peak_extended() { return RegularGrid::spanning(91, 273, 7); }

std::vector<double> whittaker_solve(std::span<const double> y,
                                    std::span<const double> weights, double lambda) {
  const std::size_t n = y.size();
  if (weights.size() != n) throw Error(ErrorKind::ShapeMismatch, "weights/data length");
  if (n == 0) return {};

  // Band of A = W + lambda * D'D: diagonal a0, first and second
  // super-diagonals a1, a2.
  std::vector<double> a0(n, 0.0), a1(n, 0.0), a2(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) a0[i] = weights[i];
  if (n >= 3) {
    for (std::size_t r = 0; r + 2 < n; ++r) {
      // Row r of D touches columns r, r+1, r+2 with coefficients 1, -2, 1.
      a0[r] += lambda;
      a0[r + 1] += 4.0 * lambda;
      a0[r + 2] += lambda;
      a1[r] += -2.0 * lambda;
      a1[r + 1] += -2.0 * lambda;
      a2[r] += lambda;
    }
  }

  // LDL' with L unit lower-triangular of bandwidth 2: l1[i] = L(i+1, i),
  // l2[i] = L(i+2, i).
  std::vector<double> d(n), l1(n, 0.0), l2(n, 0.0);
  double scale = 0.0;
  for (double v : a0) scale = std::max(scale, std::abs(v));
  const double tiny = scale * 1e-14 + std::numeric_limits<double>::min();
  for (std::size_t i = 0; i < n; ++i) {
    double di = a0[i];
    if (i >= 1) di -= l1[i - 1] * l1[i - 1] * d[i - 1];
    if (i >= 2) di -= l2[i - 2] * l2[i - 2] * d[i - 2];
    if (!(di > tiny)) {
      throw Error(ErrorKind::SingularSystem, "smoother system is not positive definite");
    }
    d[i] = di;
    if (i + 1 < n) {
      double v = a1[i];
      if (i >= 1) v -= l2[i - 1] * l1[i - 1] * d[i - 1];
      l1[i] = v / di;
    }
    if (i + 2 < n) l2[i] = a2[i] / di;
  }

  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    double v = weights[i] * y[i];
    if (i >= 1) v -= l1[i - 1] * z[i - 1];
    if (i >= 2) v -= l2[i - 2] * z[i - 2];
    z[i] = v;
  }
  for (std::size_t i = 0; i < n; ++i) z[i] /= d[i];
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 < n) z[k] -= l1[k] * z[k + 1];
    if (k + 2 < n) z[k] -= l2[k] * z[k + 2];
  }
  return z;
}

std::vector<double> interval_weights(std::span<const int> doys, double revisit_days) {
  const std::size_t n = doys.size();
  std::vector<double> w(n, 1.0);
  if (n < 2) return w;
  for (std::size_t i = 0; i < n; ++i) {
    double delta;
    if (i == 0) {
      delta = doys[1] - doys[0];
    } else if (i + 1 == n) {
      delta = doys[n - 1] - doys[n - 2];
    } else {
      delta = 0.5 * (doys[i + 1] - doys[i - 1]);
    }
    w[i] = std::min(1.0, revisit_days / delta);
  }
  return w;
}

std::vector<double> interpolate_linear(std::span<const int> x, std::span<const double> y,
                                       std::span<const int> at) {
  if (x.empty() || x.size() != y.size()) {
    throw Error(ErrorKind::ShapeMismatch, "interpolation abscissa/ordinate mismatch");
  }
  std::vector<double> out(at.size());
  std::size_t j = 0;
  for (std::size_t k = 0; k < at.size(); ++k) {
    const int t = at[k];
    if (t <= x.front()) {
      out[k] = y.front();
      continue;
    }
    if (t >= x.back()) {
      out[k] = y.back();
      continue;
    }
    // `at` is usually sorted; restart the scan when it is not.
    if (x[j] > t) j = 0;
    while (x[j + 1] < t) ++j;
    if (x[j + 1] == t) {
      out[k] = y[j + 1];
    } else if (x[j] == t) {
      out[k] = y[j];
    } else {
      const double frac = static_cast<double>(t - x[j]) / static_cast<double>(x[j + 1] - x[j]);
      out[k] = y[j] + (y[j + 1] - y[j]) * frac;
    }
  }
  return out;
}

namespace {

struct ClearBands {
  std::vector<int> doys;
  std::array<std::vector<double>, kNumBands> bands;
};

ClearBands clear_bands(const ObservationSeries& series, std::size_t min_count) {
  ClearBands out;
  for (const auto& obs : series.observations) {
    if (!obs.qa_valid) continue;
    out.doys.push_back(obs.doy);
    for (std::size_t b = 0; b < kNumBands; ++b) out.bands[b].push_back(obs.bands[b]);
  }
  if (out.doys.size() < min_count) {
    throw Error(ErrorKind::TooFewObservations,
                "pixel " + series.pixel_id + " has " + std::to_string(out.doys.size()) +
                    " clear observations, need " + std::to_string(min_count));
  }
  return out;
}

RegularSeries make_output(const ObservationSeries& series, Method method,
                          std::vector<int> doys, std::optional<RegularGrid> grid) {
  RegularSeries out;
  out.pixel_id = series.pixel_id;
  out.method = method;
  out.grid = grid;
  out.doys = std::move(doys);
  out.channel_names = optical_channel_names();
  out.values.assign(out.doys.size() * kNumBands, 0.0);
  return out;
}

std::vector<double> smoother_weights(std::span<const int> doys, const SmootherConfig& cfg) {
  if (cfg.weight_mode == WeightMode::Uniform) return std::vector<double>(doys.size(), 1.0);
  return interval_weights(doys, cfg.revisit_days);
}

}  // namespace

RegularSeries whittaker_smooth(const ObservationSeries& series, const SmootherConfig& cfg) {
  cfg.validate();
  const auto clear = clear_bands(series, 3);
  const auto w = smoother_weights(clear.doys, cfg);
  RegularSeries out = make_output(series, Method::WeightedWE, clear.doys, std::nullopt);
  for (std::size_t b = 0; b < kNumBands; ++b) {
    const auto z = whittaker_solve(clear.bands[b], w, cfg.lambda);
    for (std::size_t t = 0; t < z.size(); ++t) out.at(t, b) = z[t];
  }
  return out;
}

RegularSeries linear_resample(const ObservationSeries& series, const RegularGrid& grid) {
  grid.validate();
  const auto clear = clear_bands(series, 2);
  const auto dates = grid.doys();
  Method method = Method::LN7;
  if (grid.interval_days == 30) method = Method::LN30;
  RegularSeries out = make_output(series, method, dates, grid);
  for (std::size_t b = 0; b < kNumBands; ++b) {
    const auto v = interpolate_linear(clear.doys, clear.bands[b], dates);
    for (std::size_t t = 0; t < v.size(); ++t) out.at(t, b) = v[t];
  }
  return out;
}

RegularSeries resample_then_smooth(const ObservationSeries& series, const RegularGrid& grid,
                                   const SmootherConfig& cfg) {
  cfg.validate();
  RegularSeries out = linear_resample(series, grid);
  out.method = Method::LN7Smoothed;
  const std::vector<double> ones(out.steps(), 1.0);
  for (std::size_t b = 0; b < kNumBands; ++b) {
    const auto z = whittaker_solve(out.channel(b), ones, cfg.lambda);
    for (std::size_t t = 0; t < z.size(); ++t) out.at(t, b) = z[t];
  }
  return out;
}

PeakWindow locate_peak_window(std::span<const double> ndvi, std::span<const int> doys,
                              SeasonWindow search, std::size_t half_width) {
  const std::size_t width = 2 * half_width + 1;
  if (ndvi.size() != doys.size() || ndvi.size() < width) {
    throw Error(ErrorKind::ShapeMismatch, "peak search grid shorter than the window");
  }
  std::optional<std::size_t> best;
  for (std::size_t t = 0; t < ndvi.size(); ++t) {
    if (!search.contains(doys[t])) continue;
    if (!best || ndvi[t] > ndvi[*best]) best = t;
  }
  if (!best) throw Error(ErrorKind::TooFewObservations, "no grid step inside the search window");
  PeakWindow pw;
  pw.peak_step = *best;
  const std::size_t last_start = ndvi.size() - width;
  pw.first_step = pw.peak_step > half_width ? std::min(pw.peak_step - half_width, last_start) : 0;
  return pw;
}

RegularSeries pheno_peak_window(const ObservationSeries& series, SeasonWindow search,
                                std::size_t half_width) {
  search.validate();
  const RegularGrid extended = grid_peak_extended();
  const RegularSeries full = linear_resample(series, extended);
  std::vector<double> ndvi(full.steps());
  for (std::size_t t = 0; t < full.steps(); ++t) {
    BandValues b{};
    for (std::size_t c = 0; c < kNumBands; ++c) b[c] = full.at(t, c);
    ndvi[t] = compute_index(IndexKind::NDVI, StepInputs{b, std::nullopt, std::nullopt});
  }
  const auto pw = locate_peak_window(ndvi, full.doys, search, half_width);
  const std::size_t width = 2 * half_width + 1;

  RegularGrid grid{extended.doy(pw.first_step), extended.interval_days, width};
  RegularSeries out = make_output(series, Method::PhenoPeak, grid.doys(), grid);
  std::copy(full.values.begin() + static_cast<std::ptrdiff_t>(pw.first_step * kNumBands),
            full.values.begin() + static_cast<std::ptrdiff_t>((pw.first_step + width) * kNumBands),
            out.values.begin());
  return out;
}

std::vector<double> sar_on_dates(const ObservationSeries& series, const SmootherConfig& cfg,
                                 std::span<const int> doys) {
  cfg.validate();
  if (series.sar.size() < 2) {
    throw Error(ErrorKind::TooFewObservations,
                "pixel " + series.pixel_id + " needs at least 2 SAR acquisitions");
  }
  std::vector<int> native;
  std::vector<double> vv, vh;
  for (const auto& s : series.sar) {
    native.push_back(s.doy);
    vv.push_back(s.vv_db);
    vh.push_back(s.vh_db);
  }
  if (native.size() >= 3) {
    const auto w = smoother_weights(native, cfg);
    vv = whittaker_solve(vv, w, cfg.lambda);
    vh = whittaker_solve(vh, w, cfg.lambda);
  }
  const auto vv_i = interpolate_linear(native, vv, doys);
  const auto vh_i = interpolate_linear(native, vh, doys);
  std::vector<double> out(doys.size() * 2);
  for (std::size_t t = 0; t < doys.size(); ++t) {
    out[2 * t] = vv_i[t];
    out[2 * t + 1] = vh_i[t];
  }
  return out;
}

}  // namespace cropflow
