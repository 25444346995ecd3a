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
#include <string>
#include <vector>

#include "cropflow/autodiff.hpp"
#include "cropflow/models.hpp"
#include "cropflow/rng.hpp"
#include "cropflow/series.hpp"

namespace cropflow {

struct NamedParam {
  std::string name;
  ad::Tensor tensor;
  bool head = false;  // part of the 3-class output layer
};

// Attention probabilities from one forward pass, one entry per attention
// block, each laid out [batch][head][query][key].
struct AttentionTrace {
  std::vector<std::vector<double>> layers;
  std::size_t heads = 0;
  std::size_t steps = 0;
};

// The ten gradient-trained classifiers. Inputs are [batch*steps, channels]
// with row b*steps + t.
class SequenceModel {
 public:
  // Parameters are drawn from Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with
  // cfg.seed. Throws Config for RF or inconsistent dimensions.
  SequenceModel(const ModelConfig& cfg, std::size_t channels, std::size_t steps);

  const ModelConfig& config() const { return cfg_; }
  std::size_t channels() const { return channels_; }
  std::size_t steps() const { return steps_; }
  std::size_t feature_dim() const { return feature_dim_; }

  // Everything up to, but excluding, the output head: [batch, feature_dim].
  ad::Tensor features(const ad::Tensor& x, std::size_t batch, bool train, Rng& rng,
                      AttentionTrace* trace = nullptr) const;
  ad::Tensor head(const ad::Tensor& features) const;
  ad::Tensor logits(const ad::Tensor& x, std::size_t batch, bool train, Rng& rng,
                    AttentionTrace* trace = nullptr) const;

  const std::vector<NamedParam>& parameters() const { return params_; }
  std::vector<ad::Tensor> all_tensors() const;
  std::vector<ad::Tensor> extractor_tensors() const;
  std::vector<ad::Tensor> head_tensors() const;
  std::size_t parameter_count() const;

  // Value copies for checkpointing; restore throws ShapeMismatch.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);
  // Independent copy with its own parameter storage.
  SequenceModel clone() const;
  void zero_head();

 private:
  struct Recurrent {
    ad::Tensor w_ih, w_hh, b_ih, b_hh;
  };
  struct EncoderLayer {
    ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Tensor ln1_g, ln1_b, w1, b1, w2, b2, ln2_g, ln2_b;
  };

  ad::Tensor add_param(const std::string& name, ad::Shape shape, double bound, Rng& rng,
                       bool head = false);
  ad::Tensor add_constant(const std::string& name, ad::Shape shape, double value);
  Recurrent make_recurrent(const std::string& prefix, std::size_t in, Rng& rng);
  // Runs one direction over the sequence; returns the per-step outputs in
  // [batch*steps, hidden] layout and the final state.
  std::pair<ad::Tensor, ad::Tensor> run_direction(const Recurrent& cell, const ad::Tensor& x,
                                                  std::size_t batch, bool reverse) const;
  ad::Tensor recurrent_features(const ad::Tensor& x, std::size_t batch, bool train, Rng& rng,
                                AttentionTrace* trace) const;
  ad::Tensor transformer_features(const ad::Tensor& x, std::size_t batch, bool train, Rng& rng,
                                  AttentionTrace* trace) const;

  ModelConfig cfg_;
  std::size_t channels_;
  std::size_t steps_;
  std::size_t feature_dim_ = 0;
  std::vector<NamedParam> params_;

  std::vector<std::vector<Recurrent>> layers_;  // [layer][direction]
  ad::Tensor att_wq, att_bq, att_wk, att_bk, att_wv, att_bv, att_wo, att_bo;
  ad::Tensor in_w, in_b;
  std::vector<EncoderLayer> encoder_;
  ad::Tensor head_w, head_b;
};

// Sinusoidal position table [steps, d].
std::vector<double> sinusoidal_positions(std::size_t steps, std::size_t d);

}  // namespace cropflow
