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

#include "cropflow/models.hpp"

#include <set>
#include <string>

#include "cropflow/error.hpp"

namespace cropflow {

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::RF: return "rf";
    case ModelKind::RNN: return "rnn";
    case ModelKind::LSTM: return "lstm";
    case ModelKind::GRU: return "gru";
    case ModelKind::BiRNN: return "birnn";
    case ModelKind::BiLSTM: return "bilstm";
    case ModelKind::BiGRU: return "bigru";
    case ModelKind::AtBiRNN: return "atbirnn";
    case ModelKind::AtBiLSTM: return "atbilstm";
    case ModelKind::AtBiGRU: return "atbigru";
    case ModelKind::Transformer: return "transformer";
  }
  return "rf";
}

std::optional<ModelKind> parse_model_kind(std::string_view name) {
  if (name == "rf") return ModelKind::RF;
  for (ModelKind k : kSequenceKinds) {
    if (model_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

bool is_recurrent(ModelKind kind) {
  return kind != ModelKind::RF && kind != ModelKind::Transformer;
}

bool is_bidirectional(ModelKind kind) {
  switch (kind) {
    case ModelKind::BiRNN:
    case ModelKind::BiLSTM:
    case ModelKind::BiGRU:
    case ModelKind::AtBiRNN:
    case ModelKind::AtBiLSTM:
    case ModelKind::AtBiGRU:
      return true;
    default:
      return false;
  }
}

bool has_attention(ModelKind kind) {
  return kind == ModelKind::AtBiRNN || kind == ModelKind::AtBiLSTM ||
         kind == ModelKind::AtBiGRU;
}

CellKind cell_kind(ModelKind kind) {
  switch (kind) {
    case ModelKind::LSTM:
    case ModelKind::BiLSTM:
    case ModelKind::AtBiLSTM:
      return CellKind::Lstm;
    case ModelKind::GRU:
    case ModelKind::BiGRU:
    case ModelKind::AtBiGRU:
      return CellKind::Gru;
    default:
      return CellKind::Rnn;
  }
}

ModelConfig ModelConfig::full(ModelKind kind) {
  ModelConfig cfg;
  cfg.kind = kind;
  cfg.num_layers = is_bidirectional(kind) ? 2 : 1;
  return cfg;
}

ModelConfig ModelConfig::desk(ModelKind kind) {
  ModelConfig cfg = full(kind);
  cfg.hidden_size = 64;
  cfg.d_model = 64;
  cfg.dim_feedforward = 128;
  cfg.batch_size = 256;
  cfg.epochs = 20;
  return cfg;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorKind::Config, what); };
  if (kind == ModelKind::RF) {
    if (n_estimators == 0) fail("n_estimators must be positive");
    if (max_features == 0) fail("max_features must be positive");
    return;
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (!(lr >= 0.0)) fail("lr must be >= 0");
  if (batch_size == 0) fail("batch_size must be positive");
  if (kind == ModelKind::Transformer) {
    if (d_model == 0 || nhead == 0 || d_model % nhead != 0) {
      fail("d_model must be a positive multiple of nhead");
    }
    if (transformer_layers == 0 || dim_feedforward == 0) fail("transformer sizes must be > 0");
    return;
  }
  if (hidden_size == 0 || num_layers == 0) fail("hidden_size and num_layers must be > 0");
  if (has_attention(kind) && (2 * hidden_size) % attention_heads != 0) {
    fail("2 * hidden_size must be a multiple of attention_heads");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& cfg) {
  j = nlohmann::json{
      {"kind", std::string(model_kind_name(cfg.kind))},
      {"hidden_size", cfg.hidden_size},
      {"num_layers", cfg.num_layers},
      {"dropout", cfg.dropout},
      {"attention_heads", cfg.attention_heads},
      {"d_model", cfg.d_model},
      {"nhead", cfg.nhead},
      {"dim_feedforward", cfg.dim_feedforward},
      {"transformer_layers", cfg.transformer_layers},
      {"n_estimators", cfg.n_estimators},
      {"max_features", cfg.max_features},
      {"seed", cfg.seed},
      {"lr", cfg.lr},
      {"batch_size", cfg.batch_size},
      {"epochs", cfg.epochs},
      {"lr_factor", cfg.lr_factor},
      {"lr_patience", cfg.lr_patience},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j, bool desk_profile) {
  if (!j.is_object()) throw Error(ErrorKind::Config, "model config must be an object");
  if (!j.contains("kind")) throw Error(ErrorKind::Config, "model config needs a kind");
  const auto kind = parse_model_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorKind::Config, "unknown model kind " + j.at("kind").dump());
  ModelConfig cfg = desk_profile ? ModelConfig::desk(*kind) : ModelConfig::full(*kind);

  static const std::set<std::string> known = {
      "kind",      "hidden_size", "num_layers",    "dropout",      "attention_heads",
      "d_model",   "nhead",       "dim_feedforward", "transformer_layers", "n_estimators",
      "max_features", "seed",     "lr",            "batch_size",   "epochs",
      "lr_factor", "lr_patience", "profile"};
  try {
    for (const auto& [key, value] : j.items()) {
      if (!known.contains(key)) throw Error(ErrorKind::Config, "unknown model key: " + key);
      if (key == "hidden_size") cfg.hidden_size = value.get<std::size_t>();
      if (key == "num_layers") cfg.num_layers = value.get<std::size_t>();
      if (key == "dropout") cfg.dropout = value.get<double>();
      if (key == "attention_heads") cfg.attention_heads = value.get<std::size_t>();
      if (key == "d_model") cfg.d_model = value.get<std::size_t>();
      if (key == "nhead") cfg.nhead = value.get<std::size_t>();
      if (key == "dim_feedforward") cfg.dim_feedforward = value.get<std::size_t>();
      if (key == "transformer_layers") cfg.transformer_layers = value.get<std::size_t>();
      if (key == "n_estimators") cfg.n_estimators = value.get<std::size_t>();
      if (key == "max_features") cfg.max_features = value.get<std::size_t>();
      if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      if (key == "lr") cfg.lr = value.get<double>();
      if (key == "batch_size") cfg.batch_size = value.get<std::size_t>();
      if (key == "epochs") cfg.epochs = value.get<std::size_t>();
      if (key == "lr_factor") cfg.lr_factor = value.get<double>();
      if (key == "lr_patience") cfg.lr_patience = value.get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("model config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace cropflow
