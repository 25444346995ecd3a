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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cropflow/artifact.hpp"
#include "cropflow/dataset.hpp"
#include "cropflow/models.hpp"
#include "cropflow/parallel.hpp"
#include "json.hpp"

namespace cropflow {

using ClassArray = std::array<double, kNumClasses>;

struct FoldMetrics {
  double overall_accuracy = 0.0;
  ClassArray class_accuracy{};  // recall; 0 when the class has no support
  // Row = truth, column = prediction, each row divided by its support.
  // Rows without support are all zeros.
  std::array<ClassArray, kNumClasses> confusion{};
  std::array<std::size_t, kNumClasses> support{};
};

// Throws LengthMismatch on unequal or empty inputs.
FoldMetrics score(std::span<const int> predictions, std::span<const int> truths);

// Stratified fold index per sample. Each class is shuffled with `seed` and
// dealt round-robin, the dealing position carrying over from one class to
// the next. Throws TooFewSamples when n < k.
std::vector<std::size_t> kfold_split(std::span<const int> labels, std::size_t k,
                                     std::uint64_t seed);

// Mean after dropping one lowest and one highest value. Throws TooFewValues
// for fewer than 3 values.
double trimmed_fold_mean(std::span<const double> values);

struct FoldReport {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  FoldMetrics metrics;
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
};

struct EvalReport {
  std::string model;
  Fingerprint fingerprint;
  std::uint64_t seed = 0;
  std::vector<FoldReport> folds;

  // Trimmed mean when there are at least 3 folds, plain mean otherwise.
  double aggregate_oa() const;
  ClassArray aggregate_class_accuracy() const;
};

inline constexpr std::string_view kEvalSchema = "cropflow.eval/1";

// Deterministic content; timings are left out.
nlohmann::json report_json(const EvalReport& r);
EvalReport report_from_json(const nlohmann::json& j);
// {"schema", "folds": [{"fold", "train_seconds", "predict_seconds"}]}
nlohmann::json timings_json(const EvalReport& r);
// One row per fold plus an "aggregate" row.
std::string report_csv(const EvalReport& r);

FoldReport evaluate(const ModelArtifact& a, const SampleMatrix& test, Exec exec = Exec::Parallel);

// k-fold cross-validation: fold i is the test set, fold (i+1) % k the
// validation set, the rest is training data. Folds run through `exec`.
EvalReport cross_validate(const ModelConfig& cfg, const LabeledDataset& data, std::size_t k,
                          std::uint64_t seed, Exec exec = Exec::Parallel);

}  // namespace cropflow
