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
#include <span>
#include <string>
#include <vector>

#include "cropflow/io.hpp"
#include "cropflow/series.hpp"
#include "json.hpp"

namespace cropflow {

enum class Split { Train, Val, Test };

// What a model was trained on: it may only be applied to series with the
// same method, step count and channel list.
struct Fingerprint {
  std::string method;
  std::size_t steps = 0;
  std::vector<std::string> channels;

  friend bool operator==(const Fingerprint&, const Fingerprint&) = default;
  std::string describe() const;
};

void to_json(nlohmann::json& j, const Fingerprint& f);
void from_json(const nlohmann::json& j, Fingerprint& f);

Fingerprint fingerprint_of(const RegularSeries& series);
// Throws FingerprintMismatch with `context` in the message.
void require_fingerprint(const Fingerprint& expected, const Fingerprint& actual,
                         const std::string& context);

struct LabeledSample {
  RegularSeries series;
  ClassLabel label = ClassLabel::Other;
  Split split = Split::Train;
  std::string provenance;
};

struct LabeledDataset {
  std::vector<LabeledSample> items;

  std::size_t size() const { return items.size(); }
  // Throws ShapeMismatch if the items disagree on shape or channels.
  Fingerprint fingerprint() const;
  std::vector<std::size_t> indices(Split split) const;
  std::vector<std::size_t> all_indices() const;
  std::array<std::size_t, kNumClasses> class_counts(std::span<const std::size_t> idx) const;
  std::vector<int> labels(std::span<const std::size_t> idx) const;
};

// Pairs series with labels by pixel id; series without a label are dropped.
LabeledDataset join_labels(std::vector<RegularSeries> series,
                           std::span<const io::PixelLabel> labels);

// Dense [n, steps * channels] design matrix plus integer targets.
struct SampleMatrix {
  std::size_t steps = 0;
  std::size_t channels = 0;
  std::vector<double> x;
  std::vector<int> y;

  std::size_t size() const { return y.size(); }
  std::size_t width() const { return steps * channels; }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * width(), width()};
  }
};

SampleMatrix to_matrix(const LabeledDataset& data, std::span<const std::size_t> idx);
SampleMatrix to_matrix(std::span<const RegularSeries> series);
SampleMatrix subset(const SampleMatrix& m, std::span<const std::size_t> idx);
SampleMatrix concat(const SampleMatrix& a, const SampleMatrix& b);

// Channel-wise z-score parameters.
struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;

  // Fitted over every step of every sample; constant channels get stddev 1.
  static NormalizationStats fit(const SampleMatrix& m);
  SampleMatrix apply(const SampleMatrix& m) const;
  bool empty() const { return mean.empty(); }
};

void to_json(nlohmann::json& j, const NormalizationStats& s);
void from_json(const nlohmann::json& j, NormalizationStats& s);

}  // namespace cropflow
