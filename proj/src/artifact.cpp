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

#include "cropflow/artifact.hpp"

#include <bit>
#include <cstring>

#include "cropflow/error.hpp"
#include "cropflow/io.hpp"

namespace cropflow {

static_assert(std::endian::native == std::endian::little, "artifact blobs assume little-endian");

namespace {

void append_doubles(std::string& out, std::span<const double> v) {
  const std::size_t at = out.size();
  out.resize(at + v.size() * sizeof(double));
  if (!v.empty()) std::memcpy(out.data() + at, v.data(), v.size() * sizeof(double));
}

class BlobReader {
 public:
  explicit BlobReader(std::string_view blob) : blob_(blob) {}

  std::vector<double> take(std::size_t n) {
    if ((blob_.size() - pos_) / sizeof(double) < n) {
      throw Error(ErrorKind::Parse, "model artifact blob is truncated");
    }
    std::vector<double> v(n);
    if (n) std::memcpy(v.data(), blob_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  bool done() const { return pos_ == blob_.size(); }

 private:
  std::string_view blob_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kNodeFields = 5;

}  // namespace

std::string serialize_artifact(const ModelArtifact& a) {
  nlohmann::json h;
  h["config"] = a.config;
  h["fingerprint"] = a.fingerprint;
  h["norm"] = a.norm;
  nlohmann::json tensors = nlohmann::json::array();
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    tensors.push_back({{"name", a.param_names.at(i)}, {"size", a.params[i].size()}});
  }
  h["tensors"] = tensors;
  if (a.forest) {
    std::vector<std::size_t> sizes;
    for (const auto& t : a.forest->trees) sizes.push_back(t.nodes.size());
    h["forest"] = {{"width", a.forest->width}, {"tree_nodes", sizes}};
  }
  h["log"] = a.log;
  h["notes"] = a.notes;

  std::string blob;
  for (const auto& p : a.params) append_doubles(blob, p);
  if (a.forest) {
    for (const auto& t : a.forest->trees) {
      std::vector<double> flat;
      flat.reserve(t.nodes.size() * kNodeFields);
      for (const auto& n : t.nodes) {
        flat.insert(flat.end(), {static_cast<double>(n.feature), n.threshold,
                                 static_cast<double>(n.left), static_cast<double>(n.right),
                                 static_cast<double>(n.label)});
      }
      append_doubles(blob, flat);
    }
  }
  const std::string header = h.dump();
  std::string out = std::string(kArtifactMagic) + " " + std::to_string(kArtifactVersion) + "\n" +
                    std::to_string(header.size()) + "\n" + header;
  out += blob;
  return out;
}

ModelArtifact deserialize_artifact(std::string_view bytes) {
  const auto line_end = [&](std::size_t from) {
    const auto p = bytes.find('\n', from);
    if (p == std::string_view::npos) throw Error(ErrorKind::Parse, "model artifact header is truncated");
    return p;
  };
  const std::size_t l1 = line_end(0);
  const std::string expected = std::string(kArtifactMagic) + " " + std::to_string(kArtifactVersion);
  if (bytes.substr(0, l1) != expected) {
    throw Error(ErrorKind::Parse, "not a version " + std::to_string(kArtifactVersion) +
                                      " model artifact");
  }
  const std::size_t l2 = line_end(l1 + 1);
  const auto header_size = static_cast<std::size_t>(io::parse_int(bytes.substr(l1 + 1, l2 - l1 - 1)));
  if (bytes.size() - (l2 + 1) < header_size) {
    throw Error(ErrorKind::Parse, "model artifact header is truncated");
  }
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(l2 + 1, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("model artifact header: ") + e.what());
  }
  BlobReader blob(bytes.substr(l2 + 1 + header_size));

  ModelArtifact a;
  try {
    a.config = model_config_from_json(h.at("config"), false);
    a.fingerprint = h.at("fingerprint").get<Fingerprint>();
    a.norm = h.at("norm").get<NormalizationStats>();
    for (const auto& t : h.at("tensors")) {
      a.param_names.push_back(t.at("name").get<std::string>());
      a.params.push_back(blob.take(t.at("size").get<std::size_t>()));
    }
    if (h.contains("forest")) {
      RandomForest f;
      f.width = h["forest"].at("width").get<std::size_t>();
      for (std::size_t count : h["forest"].at("tree_nodes").get<std::vector<std::size_t>>()) {
        const auto flat = blob.take(count * kNodeFields);
        DecisionTree t;
        t.nodes.resize(count);
        for (std::size_t i = 0; i < count; ++i) {
          const double* p = flat.data() + i * kNodeFields;
          t.nodes[i] = {static_cast<std::int32_t>(p[0]), p[1], static_cast<std::int32_t>(p[2]),
                        static_cast<std::int32_t>(p[3]), static_cast<std::int32_t>(p[4])};
        }
        f.trees.push_back(std::move(t));
      }
      a.forest = std::move(f);
    }
    a.log = h.at("log").get<std::vector<EpochLog>>();
    a.notes = h.at("notes");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("model artifact header: ") + e.what());
  }
  if (!blob.done()) throw Error(ErrorKind::Parse, "model artifact has trailing bytes");
  return a;
}

void save_artifact(const ModelArtifact& a, const std::filesystem::path& path) {
  io::write_text_file(path, serialize_artifact(a));
}

ModelArtifact load_artifact(const std::filesystem::path& path) {
  return deserialize_artifact(io::read_text_file(path));
}

SequenceModel instantiate(const ModelArtifact& a) {
  if (a.is_forest()) {
    throw Error(ErrorKind::UnsupportedModelKind, "random forest artifacts hold no network");
  }
  SequenceModel model(a.config, a.fingerprint.channels.size(), a.fingerprint.steps);
  const auto& named = model.parameters();
  if (named.size() != a.params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "artifact parameter count does not match its config");
  }
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].name != a.param_names[i]) {
      throw Error(ErrorKind::ShapeMismatch, "artifact parameter " + a.param_names[i] +
                                                " where " + named[i].name + " was expected");
    }
  }
  model.restore(a.params);
  return model;
}

void capture_parameters(ModelArtifact& a, const SequenceModel& model) {
  a.param_names.clear();
  for (const auto& p : model.parameters()) a.param_names.push_back(p.name);
  a.params = model.snapshot();
}

ModelArtifact train_artifact(const ModelConfig& cfg, const Fingerprint& fp,
                             const SampleMatrix& train, const SampleMatrix& val, Exec exec) {
  cfg.validate();
  if (train.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "training split is empty");
  if (train.steps != fp.steps || train.channels != fp.channels.size()) {
    throw Error(ErrorKind::ShapeMismatch, "training matrix does not match " + fp.describe());
  }
  ModelArtifact a;
  a.config = cfg;
  a.fingerprint = fp;
  if (cfg.kind == ModelKind::RF) {
    a.forest = train_forest(train, {cfg.n_estimators, cfg.max_features, cfg.seed}, exec);
    return a;
  }
  a.norm = NormalizationStats::fit(train);
  SequenceModel model(cfg, fp.channels.size(), fp.steps);
  const auto result = fit_sequence(model, a.norm.apply(train), a.norm.apply(val),
                                   TrainOptions::from(cfg));
  a.log = result.log;
  capture_parameters(a, model);
  return a;
}

ModelArtifact train_artifact(const ModelConfig& cfg, const LabeledDataset& data,
                             std::span<const std::size_t> train_idx,
                             std::span<const std::size_t> val_idx, Exec exec) {
  return train_artifact(cfg, data.fingerprint(), to_matrix(data, train_idx),
                        to_matrix(data, val_idx), exec);
}

std::vector<Probabilities> artifact_proba(const ModelArtifact& a, const SampleMatrix& raw,
                                          Exec exec) {
  if (raw.size() > 0 && (raw.steps != a.fingerprint.steps ||
                         raw.channels != a.fingerprint.channels.size())) {
    throw Error(ErrorKind::ShapeMismatch, "input does not match model fingerprint " +
                                              a.fingerprint.describe());
  }
  if (a.forest) {
    std::vector<Probabilities> out(raw.size());
    const double n = static_cast<double>(a.forest->trees.size());
    for_each_index(raw.size(), exec, [&](std::size_t i) {
      const Votes v = a.forest->votes(raw.row(i));
      for (std::size_t c = 0; c < kNumClasses; ++c) out[i][c] = static_cast<double>(v[c]) / n;
    });
    return out;
  }
  return predict_proba(instantiate(a), a.norm.apply(raw), exec);
}

std::vector<int> artifact_predict(const ModelArtifact& a, const SampleMatrix& raw, Exec exec) {
  if (a.forest) {
    if (raw.size() > 0 && (raw.steps != a.fingerprint.steps ||
                           raw.channels != a.fingerprint.channels.size())) {
      throw Error(ErrorKind::ShapeMismatch, "input does not match model fingerprint " +
                                                a.fingerprint.describe());
    }
    return a.forest->predict_all(raw, exec);
  }
  const auto p = artifact_proba(a, raw, exec);
  std::vector<int> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = argmax(p[i]);
  return out;
}

}  // namespace cropflow
