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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cropflow/artifact.hpp"
#include "cropflow/dataset.hpp"
#include "cropflow/eval.hpp"
#include "cropflow/models.hpp"

namespace cropflow {

// Scores a frozen model on labeled target data. Throws FingerprintMismatch.
EvalReport direct_transfer_eval(const ModelArtifact& model, const LabeledDataset& target_test,
                                Exec exec = Exec::Parallel);

enum class FinetuneStrategy {
  R1,  // all parameters, full target train split, plain shuffling
  R2,  // inverse-frequency loss weights and weighted sampler
  R3,  // undersample every class to the minority count, then as R1
  R4,  // R3 for one stage, then R2 with only the output head trainable
};

std::string_view strategy_name(FinetuneStrategy s);
std::optional<FinetuneStrategy> parse_strategy(std::string_view name);

struct FinetuneConfig {
  FinetuneStrategy strategy = FinetuneStrategy::R1;
  std::size_t epochs = 40;        // R1-R3
  std::size_t stage_epochs = 20;  // each R4 stage
  double lr = 1e-5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 100;
};

// Indices that keep `minority` randomly chosen members of every class.
std::vector<std::size_t> undersample_balanced(std::span<const int> labels, std::uint64_t seed);

struct FinetuneResult {
  ModelArtifact artifact;
  // R4 only: every parameter at the end of stage one.
  std::vector<std::vector<double>> stage_one_params;
};

// Inputs are raw target matrices; the pretrained normalization is reused.
// Throws UnsupportedModelKind for forests and EmptyClass when the target
// train split lacks a class.
FinetuneResult fine_tune(const ModelArtifact& pretrained, const SampleMatrix& target_train,
                         const SampleMatrix& target_val, const FinetuneConfig& cfg);

// Target samples for adaptation. It carries no labels.
struct UnlabeledSet {
  Fingerprint fingerprint;
  std::vector<double> x;  // [n, steps * channels]

  std::size_t width() const { return fingerprint.steps * fingerprint.channels.size(); }
  std::size_t size() const { return width() == 0 ? 0 : x.size() / width(); }
  // Throws ShapeMismatch when the series disagree.
  static UnlabeledSet from(std::span<const RegularSeries> series);
};

enum class LambdaSchedule {
  Progressive,  // lambda(p) = scale * (2 / (1 + exp(-10 p)) - 1)
  Constant,     // lambda = scale
};

double grl_lambda(LambdaSchedule schedule, double scale, double progress);

struct DannConfig {
  ModelConfig model;
  std::size_t domain_hidden = 64;
  LambdaSchedule schedule = LambdaSchedule::Progressive;
  double lambda_scale = 1.0;
};

struct DannResult {
  ModelArtifact artifact;
  // Domain head accuracy on a balanced set of source validation and target
  // samples after training.
  double domain_accuracy = 0.0;
};

// Joint training of the label head on source data and an adversarial
// domain head on source and target features. Normalization is fitted on
// the source train split. Throws FingerprintMismatch, NonFiniteLoss.
DannResult dann_train(const Fingerprint& fp, const SampleMatrix& source_train,
                      const SampleMatrix& source_val, const UnlabeledSet& target,
                      const DannConfig& cfg);

// Draws total/k samples from each of k domains (the first total % k domains
// get one more), keeping each domain's class proportions by largest
// remainder. Sampling inside a domain is seeded from `seed` and the
// domain's pixel ids, so it does not depend on the domain's position.
// Provenance is set to "domain<i>". Throws InsufficientSamples,
// FingerprintMismatch.
LabeledDataset multi_source_compose(std::span<const LabeledDataset> domains, std::size_t total,
                                    std::uint64_t seed);

}  // namespace cropflow
