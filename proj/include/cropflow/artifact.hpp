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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cropflow/dataset.hpp"
#include "cropflow/forest.hpp"
#include "cropflow/models.hpp"
#include "cropflow/parallel.hpp"
#include "cropflow/sequence_model.hpp"
#include "cropflow/trainer.hpp"
#include "json.hpp"

namespace cropflow {

// A trained classifier with everything needed to apply it to new series.
struct ModelArtifact {
  ModelConfig config;
  Fingerprint fingerprint;
  NormalizationStats norm;              // empty for forests
  std::optional<RandomForest> forest;   // set iff config.kind == RF
  std::vector<std::string> param_names;
  std::vector<std::vector<double>> params;
  std::vector<EpochLog> log;
  nlohmann::json notes = nlohmann::json::object();

  bool is_forest() const { return forest.has_value(); }
};

inline constexpr std::string_view kArtifactMagic = "CROPFLOW-MODEL";
inline constexpr int kArtifactVersion = 1;

// Layout: "CROPFLOW-MODEL 1\n", the JSON header byte count on its own line,
// the JSON header, then little-endian doubles for tensors and tree nodes.
std::string serialize_artifact(const ModelArtifact& a);
ModelArtifact deserialize_artifact(std::string_view bytes);
void save_artifact(const ModelArtifact& a, const std::filesystem::path& path);
ModelArtifact load_artifact(const std::filesystem::path& path);

// Trains an RF (val ignored) or a sequence model (z-score fitted on train).
// Matrices hold raw, unnormalized values.
ModelArtifact train_artifact(const ModelConfig& cfg, const Fingerprint& fp,
                             const SampleMatrix& train, const SampleMatrix& val,
                             Exec exec = Exec::Parallel);
ModelArtifact train_artifact(const ModelConfig& cfg, const LabeledDataset& data,
                             std::span<const std::size_t> train_idx,
                             std::span<const std::size_t> val_idx, Exec exec = Exec::Parallel);

// Rebuilds the network and loads the stored parameters. Throws
// UnsupportedModelKind for forests.
SequenceModel instantiate(const ModelArtifact& a);
void capture_parameters(ModelArtifact& a, const SequenceModel& model);

// Class probabilities (vote shares for forests) on raw inputs.
std::vector<Probabilities> artifact_proba(const ModelArtifact& a, const SampleMatrix& raw,
                                          Exec exec = Exec::Parallel);
std::vector<int> artifact_predict(const ModelArtifact& a, const SampleMatrix& raw,
                                  Exec exec = Exec::Parallel);

}  // namespace cropflow
