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
#include <string_view>

#include "json.hpp"

namespace cropflow {

enum class ModelKind {
  RF,
  RNN,
  LSTM,
  GRU,
  BiRNN,
  BiLSTM,
  BiGRU,
  AtBiRNN,
  AtBiLSTM,
  AtBiGRU,
  Transformer,
};

inline constexpr ModelKind kSequenceKinds[] = {
    ModelKind::RNN,     ModelKind::LSTM,     ModelKind::GRU,     ModelKind::BiRNN,
    ModelKind::BiLSTM,  ModelKind::BiGRU,    ModelKind::AtBiRNN, ModelKind::AtBiLSTM,
    ModelKind::AtBiGRU, ModelKind::Transformer};

std::string_view model_kind_name(ModelKind kind);
std::optional<ModelKind> parse_model_kind(std::string_view name);

enum class CellKind { Rnn, Lstm, Gru };

bool is_recurrent(ModelKind kind);
bool is_bidirectional(ModelKind kind);
bool has_attention(ModelKind kind);
CellKind cell_kind(ModelKind kind);

// Hyperparameters and training parameters. Only the fields relevant to
// `kind` are used.
struct ModelConfig {
  ModelKind kind = ModelKind::Transformer;

  // Recurrent models.
  std::size_t hidden_size = 256;
  std::size_t num_layers = 1;
  double dropout = 0.2;
  std::size_t attention_heads = 4;

  // Transformer.
  std::size_t d_model = 512;
  std::size_t nhead = 8;
  std::size_t dim_feedforward = 256;
  std::size_t transformer_layers = 2;

  // Random forest.
  std::size_t n_estimators = 500;
  std::size_t max_features = 8;

  std::uint64_t seed = 100;

  // Gradient training.
  double lr = 5e-4;
  std::size_t batch_size = 4096;
  std::size_t epochs = 30;
  double lr_factor = 0.5;
  std::size_t lr_patience = 3;

  // Full-size defaults for the kind.
  static ModelConfig full(ModelKind kind);
  // Same architecture scaled down for desk-scale runs: hidden 64, d_model
  // 64, feedforward 128, batch 256.
  static ModelConfig desk(ModelKind kind);

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& cfg);
// Starts from the profile defaults of j["kind"] and applies the given keys;
// unknown keys throw Config.
ModelConfig model_config_from_json(const nlohmann::json& j, bool desk_profile);

}  // namespace cropflow
