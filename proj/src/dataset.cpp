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

#include "cropflow/dataset.hpp"

#include <cmath>
#include <unordered_map>

#include "cropflow/error.hpp"

namespace cropflow {

std::string Fingerprint::describe() const {
  std::string s = method + "/" + std::to_string(steps) + " steps/";
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (i) s += ",";
    s += channels[i];
  }
  return s;
}

void to_json(nlohmann::json& j, const Fingerprint& f) {
  j = nlohmann::json{{"method", f.method}, {"steps", f.steps}, {"channels", f.channels}};
}

void from_json(const nlohmann::json& j, Fingerprint& f) {
  f.method = j.at("method").get<std::string>();
  f.steps = j.at("steps").get<std::size_t>();
  f.channels = j.at("channels").get<std::vector<std::string>>();
}

Fingerprint fingerprint_of(const RegularSeries& series) {
  return {std::string(method_name(series.method)), series.steps(), series.channel_names};
}

void require_fingerprint(const Fingerprint& expected, const Fingerprint& actual,
                         const std::string& context) {
  if (!(expected == actual)) {
    throw Error(ErrorKind::FingerprintMismatch, context + ": expected " + expected.describe() +
                                                    ", got " + actual.describe());
  }
}

Fingerprint LabeledDataset::fingerprint() const {
  if (items.empty()) return {};
  const Fingerprint f = fingerprint_of(items.front().series);
  for (const auto& it : items) {
    if (!(fingerprint_of(it.series) == f)) {
      throw Error(ErrorKind::ShapeMismatch, "dataset mixes " + f.describe() + " and " +
                                                fingerprint_of(it.series).describe());
    }
  }
  return f;
}

std::vector<std::size_t> LabeledDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].split == split) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> LabeledDataset::all_indices() const {
  std::vector<std::size_t> out(items.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
  return out;
}

std::array<std::size_t, kNumClasses> LabeledDataset::class_counts(
    std::span<const std::size_t> idx) const {
  std::array<std::size_t, kNumClasses> c{};
  for (std::size_t i : idx) ++c[static_cast<std::size_t>(class_index(items[i].label))];
  return c;
}

std::vector<int> LabeledDataset::labels(std::span<const std::size_t> idx) const {
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(class_index(items[i].label));
  return out;
}

LabeledDataset join_labels(std::vector<RegularSeries> series,
                           std::span<const io::PixelLabel> labels) {
  std::unordered_map<std::string, ClassLabel> by_id;
  for (const auto& l : labels) by_id[l.pixel_id] = l.label;
  LabeledDataset out;
  for (auto& s : series) {
    auto it = by_id.find(s.pixel_id);
    if (it == by_id.end()) continue;
    LabeledSample sample;
    sample.label = it->second;
    sample.series = std::move(s);
    out.items.push_back(std::move(sample));
  }
  return out;
}

namespace {

void append_series(SampleMatrix& m, const RegularSeries& s) {
  if (m.x.empty() && m.y.empty()) {
    m.steps = s.steps();
    m.channels = s.channels();
  }
  if (s.steps() != m.steps || s.channels() != m.channels) {
    throw Error(ErrorKind::ShapeMismatch, "series " + s.pixel_id + " does not match the batch shape");
  }
  m.x.insert(m.x.end(), s.values.begin(), s.values.end());
}

}  // namespace

SampleMatrix to_matrix(const LabeledDataset& data, std::span<const std::size_t> idx) {
  SampleMatrix m;
  if (!data.items.empty()) {
    m.steps = data.items.front().series.steps();
    m.channels = data.items.front().series.channels();
  }
  m.x.reserve(idx.size() * m.width());
  for (std::size_t i : idx) {
    append_series(m, data.items[i].series);
    m.y.push_back(class_index(data.items[i].label));
  }
  return m;
}

SampleMatrix to_matrix(std::span<const RegularSeries> series) {
  SampleMatrix m;
  for (const auto& s : series) {
    append_series(m, s);
    m.y.push_back(0);
  }
  return m;
}

SampleMatrix subset(const SampleMatrix& m, std::span<const std::size_t> idx) {
  SampleMatrix out;
  out.steps = m.steps;
  out.channels = m.channels;
  out.x.reserve(idx.size() * m.width());
  for (std::size_t i : idx) {
    const auto r = m.row(i);
    out.x.insert(out.x.end(), r.begin(), r.end());
    out.y.push_back(m.y[i]);
  }
  return out;
}

SampleMatrix concat(const SampleMatrix& a, const SampleMatrix& b) {
  if (a.size() == 0) return b;
  if (b.size() == 0) return a;
  if (a.steps != b.steps || a.channels != b.channels) {
    throw Error(ErrorKind::ShapeMismatch, "concat of differently shaped sample matrices");
  }
  SampleMatrix out = a;
  out.x.insert(out.x.end(), b.x.begin(), b.x.end());
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  return out;
}

NormalizationStats NormalizationStats::fit(const SampleMatrix& m) {
  NormalizationStats s;
  const std::size_t c = m.channels;
  s.mean.assign(c, 0.0);
  s.stddev.assign(c, 0.0);
  const std::size_t rows = m.size() * m.steps;
  if (rows == 0) {
    s.stddev.assign(c, 1.0);
    return s;
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < c; ++k) s.mean[k] += m.x[r * c + k];
  }
  for (double& v : s.mean) v /= static_cast<double>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < c; ++k) {
      const double d = m.x[r * c + k] - s.mean[k];
      s.stddev[k] += d * d;
    }
  }
  for (double& v : s.stddev) {
    v = std::sqrt(v / static_cast<double>(rows));
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

SampleMatrix NormalizationStats::apply(const SampleMatrix& m) const {
  if (mean.size() != m.channels) {
    throw Error(ErrorKind::ShapeMismatch, "normalization stats channel count mismatch");
  }
  SampleMatrix out = m;
  const std::size_t c = m.channels;
  for (std::size_t r = 0; r < m.size() * m.steps; ++r) {
    for (std::size_t k = 0; k < c; ++k) {
      out.x[r * c + k] = (m.x[r * c + k] - mean[k]) / stddev[k];
    }
  }
  return out;
}

void to_json(nlohmann::json& j, const NormalizationStats& s) {
  j = nlohmann::json{{"mean", s.mean}, {"stddev", s.stddev}};
}

void from_json(const nlohmann::json& j, NormalizationStats& s) {
  s.mean = j.at("mean").get<std::vector<double>>();
  s.stddev = j.at("stddev").get<std::vector<double>>();
}

}  // namespace cropflow
