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
#include <optional>
#include <string>
#include <vector>

#include "cropflow/autodiff.hpp"
#include "cropflow/dataset.hpp"
#include "cropflow/models.hpp"
#include "cropflow/parallel.hpp"
#include "cropflow/sequence_model.hpp"
#include "json.hpp"

namespace cropflow {

struct EpochLog {
  std::string stage;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;
  std::optional<double> domain_acc;
};

void to_json(nlohmann::json& j, const EpochLog& e);
void from_json(const nlohmann::json& j, EpochLog& e);

enum class Sampling {
  Shuffle,
  // Draws each epoch's samples with replacement, with probability
  // proportional to the sample's class weight.
  ClassWeighted,
};

struct TrainOptions {
  std::string stage = "train";
  std::size_t epochs = 30;
  std::size_t batch_size = 256;
  double lr = 5e-4;
  double lr_factor = 0.5;
  std::size_t lr_patience = 3;
  std::uint64_t seed = 100;
  Sampling sampling = Sampling::Shuffle;
  std::vector<double> class_weights;  // loss weights; empty means uniform
  bool head_only = false;             // only the output layer is updated

  static TrainOptions from(const ModelConfig& cfg);
};

// Extra loss terms computed from the source-batch features, used for
// adversarial adaptation.
class TrainHook {
 public:
  virtual ~TrainHook() = default;
  // Additional trainable tensors.
  virtual std::vector<ad::Tensor> parameters() const = 0;
  // Called once per step; `progress` runs from 0 to 1 over training.
  virtual ad::Tensor extra_loss(const SequenceModel& model, const ad::Tensor& source_features,
                                double progress) = 0;
  // Optional per-epoch metric recorded in the log.
  virtual std::optional<double> epoch_metric(const SequenceModel&) { return std::nullopt; }
};

struct TrainResult {
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
};

// Minibatch Adam with a plateau scheduler. Keeps the parameters of the
// epoch with the lowest (unweighted) validation loss and restores them at
// the end. Inputs must already be normalized. Throws EmptyTrainSet,
// NonFiniteLoss.
TrainResult fit_sequence(SequenceModel& model, const SampleMatrix& train, const SampleMatrix& val,
                         const TrainOptions& opts, TrainHook* hook = nullptr);

// Builds the [batch*steps, channels] input for rows [begin, end).
ad::Tensor batch_tensor(const SampleMatrix& m, std::span<const std::size_t> rows);

using Probabilities = std::array<double, kNumClasses>;

std::vector<Probabilities> predict_proba(const SequenceModel& model, const SampleMatrix& m,
                                         Exec exec = Exec::Parallel, std::size_t chunk = 512);

// Mean unweighted cross-entropy and accuracy in evaluation mode.
std::pair<double, double> evaluate_loss(const SequenceModel& model, const SampleMatrix& m,
                                        Exec exec = Exec::Parallel);

int argmax(const Probabilities& p);

// Inverse class frequency weights normalized to mean 1 over the classes
// present. Throws EmptyClass when a class has no samples.
std::array<double, kNumClasses> inverse_frequency_weights(std::span<const int> labels);

}  // namespace cropflow
