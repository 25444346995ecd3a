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

#include "cropflow/sequence_model.hpp"

#include <cmath>

#include "cropflow/error.hpp"

namespace cropflow {

using ad::Shape;
using ad::Tensor;

namespace {

std::size_t gate_count(CellKind kind) {
  switch (kind) {
    case CellKind::Rnn:
      return 1;
    case CellKind::Lstm:
      return 4;
    case CellKind::Gru:
      return 3;
  }
  return 1;
}

// Row indices that pick step t of every sequence.
std::vector<std::size_t> step_rows(std::size_t batch, std::size_t steps, std::size_t t) {
  std::vector<std::size_t> idx(batch);
  for (std::size_t b = 0; b < batch; ++b) idx[b] = b * steps + t;
  return idx;
}

Tensor attention_block(const Tensor& x, const Tensor& wq, const Tensor& bq, const Tensor& wk,
                       const Tensor& bk, const Tensor& wv, const Tensor& bv, const Tensor& wo,
                       const Tensor& bo, std::size_t batch, std::size_t steps, std::size_t heads,
                       AttentionTrace* trace) {
  std::vector<double> weights;
  Tensor a = ad::multi_head_attention(ad::affine(x, wq, bq), ad::affine(x, wk, bk),
                                      ad::affine(x, wv, bv), batch, steps, heads,
                                      trace ? &weights : nullptr);
  if (trace) {
    trace->heads = heads;
    trace->steps = steps;
    trace->layers.push_back(std::move(weights));
  }
  return ad::affine(a, wo, bo);
}

}  // namespace

std::vector<double> sinusoidal_positions(std::size_t steps, std::size_t d) {
  std::vector<double> pe(steps * d);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(i - i % 2) / static_cast<double>(d));
      const double angle = static_cast<double>(t) * rate;
      pe[t * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Tensor SequenceModel::add_param(const std::string& name, Shape shape, double bound, Rng& rng,
                                bool head) {
  Tensor t = Tensor::uniform(shape, bound, rng);
  params_.push_back({name, t, head});
  return t;
}

Tensor SequenceModel::add_constant(const std::string& name, Shape shape, double value) {
  Tensor t = Tensor::from(shape, std::vector<double>(shape.size(), value), true);
  params_.push_back({name, t, false});
  return t;
}

SequenceModel::Recurrent SequenceModel::make_recurrent(const std::string& prefix, std::size_t in,
                                                       Rng& rng) {
  const std::size_t h = cfg_.hidden_size;
  const std::size_t g = gate_count(cell_kind(cfg_.kind)) * h;
  const double bi = 1.0 / std::sqrt(static_cast<double>(in));
  const double bh = 1.0 / std::sqrt(static_cast<double>(h));
  Recurrent r;
  r.w_ih = add_param(prefix + ".w_ih", {in, g}, bi, rng);
  r.w_hh = add_param(prefix + ".w_hh", {h, g}, bh, rng);
  r.b_ih = add_param(prefix + ".b_ih", {1, g}, bi, rng);
  r.b_hh = add_param(prefix + ".b_hh", {1, g}, bh, rng);
  return r;
}

SequenceModel::SequenceModel(const ModelConfig& cfg, std::size_t channels, std::size_t steps)
    : cfg_(cfg), channels_(channels), steps_(steps) {
  cfg_.validate();
  if (cfg_.kind == ModelKind::RF) {
    throw Error(ErrorKind::UnsupportedModelKind, "random forest is not a sequence model");
  }
  if (channels == 0 || steps == 0) {
    throw Error(ErrorKind::ShapeMismatch, "sequence model needs at least one channel and step");
  }
  Rng rng(cfg_.seed);
  if (is_recurrent(cfg_.kind)) {
    const std::size_t dirs = is_bidirectional(cfg_.kind) ? 2 : 1;
    const std::size_t h = cfg_.hidden_size;
    std::size_t in = channels;
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      std::vector<Recurrent> layer;
      for (std::size_t d = 0; d < dirs; ++d) {
        layer.push_back(make_recurrent(
            "rnn.l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd"), in, rng));
      }
      layers_.push_back(std::move(layer));
      in = dirs * h;
    }
    feature_dim_ = dirs * h;
    if (has_attention(cfg_.kind)) {
      const std::size_t d = feature_dim_;
      if (d % cfg_.attention_heads != 0) {
        throw Error(ErrorKind::Config, "2*hidden_size must be divisible by attention_heads");
      }
      const double b = 1.0 / std::sqrt(static_cast<double>(d));
      att_wq = add_param("att.wq", {d, d}, b, rng);
      att_bq = add_param("att.bq", {1, d}, b, rng);
      att_wk = add_param("att.wk", {d, d}, b, rng);
      att_bk = add_param("att.bk", {1, d}, b, rng);
      att_wv = add_param("att.wv", {d, d}, b, rng);
      att_bv = add_param("att.bv", {1, d}, b, rng);
      att_wo = add_param("att.wo", {d, d}, b, rng);
      att_bo = add_param("att.bo", {1, d}, b, rng);
    }
  } else {
    const std::size_t d = cfg_.d_model;
    const std::size_t ff = cfg_.dim_feedforward;
    if (d % cfg_.nhead != 0) throw Error(ErrorKind::Config, "d_model must be divisible by nhead");
    const double bc = 1.0 / std::sqrt(static_cast<double>(channels));
    const double bd = 1.0 / std::sqrt(static_cast<double>(d));
    const double bf = 1.0 / std::sqrt(static_cast<double>(ff));
    in_w = add_param("input.w", {channels, d}, bc, rng);
    in_b = add_param("input.b", {1, d}, bc, rng);
    for (std::size_t l = 0; l < cfg_.transformer_layers; ++l) {
      const std::string p = "enc.l" + std::to_string(l);
      EncoderLayer e;
      e.wq = add_param(p + ".wq", {d, d}, bd, rng);
      e.bq = add_param(p + ".bq", {1, d}, bd, rng);
      e.wk = add_param(p + ".wk", {d, d}, bd, rng);
      e.bk = add_param(p + ".bk", {1, d}, bd, rng);
      e.wv = add_param(p + ".wv", {d, d}, bd, rng);
      e.bv = add_param(p + ".bv", {1, d}, bd, rng);
      e.wo = add_param(p + ".wo", {d, d}, bd, rng);
      e.bo = add_param(p + ".bo", {1, d}, bd, rng);
      e.ln1_g = add_constant(p + ".ln1.gamma", {1, d}, 1.0);
      e.ln1_b = add_constant(p + ".ln1.beta", {1, d}, 0.0);
      e.w1 = add_param(p + ".ff.w1", {d, ff}, bd, rng);
      e.b1 = add_param(p + ".ff.b1", {1, ff}, bd, rng);
      e.w2 = add_param(p + ".ff.w2", {ff, d}, bf, rng);
      e.b2 = add_param(p + ".ff.b2", {1, d}, bf, rng);
      e.ln2_g = add_constant(p + ".ln2.gamma", {1, d}, 1.0);
      e.ln2_b = add_constant(p + ".ln2.beta", {1, d}, 0.0);
      encoder_.push_back(std::move(e));
    }
    feature_dim_ = d;
  }
  const double bh = 1.0 / std::sqrt(static_cast<double>(feature_dim_));
  head_w = add_param("head.w", {feature_dim_, kNumClasses}, bh, rng, true);
  head_b = add_param("head.b", {1, kNumClasses}, bh, rng, true);
}

std::pair<Tensor, Tensor> SequenceModel::run_direction(const Recurrent& cell, const Tensor& x,
                                                       std::size_t batch, bool reverse) const {
  const std::size_t steps = steps_;
  const std::size_t h = cfg_.hidden_size;
  const CellKind kind = cell_kind(cfg_.kind);
  const Tensor xw = ad::affine(x, cell.w_ih, cell.b_ih);
  Tensor state = Tensor::zeros({batch, h});
  Tensor cell_state = Tensor::zeros({batch, h});
  std::vector<Tensor> outputs(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = reverse ? steps - 1 - i : i;
    const auto rows = step_rows(batch, steps, t);
    const Tensor gi = ad::gather_rows(xw, rows);
    const Tensor gh = ad::affine(state, cell.w_hh, cell.b_hh);
    switch (kind) {
      case CellKind::Rnn:
        state = ad::tanh(ad::add(gi, gh));
        break;
      case CellKind::Lstm: {
        const Tensor g = ad::add(gi, gh);
        const Tensor in_gate = ad::sigmoid(ad::slice_cols(g, 0, h));
        const Tensor forget = ad::sigmoid(ad::slice_cols(g, h, h));
        const Tensor cand = ad::tanh(ad::slice_cols(g, 2 * h, h));
        const Tensor out_gate = ad::sigmoid(ad::slice_cols(g, 3 * h, h));
        cell_state = ad::add(ad::mul(forget, cell_state), ad::mul(in_gate, cand));
        state = ad::mul(out_gate, ad::tanh(cell_state));
        break;
      }
      case CellKind::Gru: {
        const Tensor reset = ad::sigmoid(ad::add(ad::slice_cols(gi, 0, h), ad::slice_cols(gh, 0, h)));
        const Tensor update = ad::sigmoid(ad::add(ad::slice_cols(gi, h, h), ad::slice_cols(gh, h, h)));
        const Tensor cand = ad::tanh(
            ad::add(ad::slice_cols(gi, 2 * h, h), ad::mul(reset, ad::slice_cols(gh, 2 * h, h))));
        // (1 - z) * n + z * h
        state = ad::add(cand, ad::mul(update, ad::sub(state, cand)));
        break;
      }
    }
    outputs[t] = state;
  }
  // concat_rows gives row t*batch + b; reorder to b*steps + t.
  const Tensor stacked = ad::concat_rows(outputs);
  std::vector<std::size_t> order(batch * steps);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < steps; ++t) order[b * steps + t] = t * batch + b;
  }
  return {ad::gather_rows(stacked, order), state};
}

Tensor SequenceModel::recurrent_features(const Tensor& x, std::size_t batch, bool train, Rng& rng,
                                         AttentionTrace* trace) const {
  Tensor input = x;
  std::vector<Tensor> finals;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (l > 0) input = ad::dropout(input, cfg_.dropout, train, rng);
    std::vector<Tensor> seqs;
    finals.clear();
    for (std::size_t d = 0; d < layers_[l].size(); ++d) {
      auto [seq, last] = run_direction(layers_[l][d], input, batch, d == 1);
      seqs.push_back(seq);
      finals.push_back(last);
    }
    input = seqs.size() == 1 ? seqs.front() : ad::concat_cols(seqs);
  }
  if (has_attention(cfg_.kind)) {
    const Tensor att = attention_block(input, att_wq, att_bq, att_wk, att_bk, att_wv, att_bv,
                                       att_wo, att_bo, batch, steps_, cfg_.attention_heads, trace);
    return ad::mean_row_groups(att, steps_);
  }
  return finals.size() == 1 ? finals.front() : ad::concat_cols(finals);
}

Tensor SequenceModel::transformer_features(const Tensor& x, std::size_t batch, bool train,
                                           Rng& rng, AttentionTrace* trace) const {
  const std::size_t d = cfg_.d_model;
  const auto table = sinusoidal_positions(steps_, d);
  std::vector<double> pe(batch * steps_ * d);
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy(table.begin(), table.end(), pe.begin() + static_cast<std::ptrdiff_t>(b * steps_ * d));
  }
  Tensor h = ad::add(ad::affine(x, in_w, in_b), Tensor::from({batch * steps_, d}, std::move(pe)));
  for (const auto& e : encoder_) {
    const Tensor a = attention_block(h, e.wq, e.bq, e.wk, e.bk, e.wv, e.bv, e.wo, e.bo, batch,
                                     steps_, cfg_.nhead, trace);
    h = ad::layer_norm(ad::add(h, ad::dropout(a, cfg_.dropout, train, rng)), e.ln1_g, e.ln1_b);
    const Tensor f = ad::affine(ad::relu(ad::affine(h, e.w1, e.b1)), e.w2, e.b2);
    h = ad::layer_norm(ad::add(h, ad::dropout(f, cfg_.dropout, train, rng)), e.ln2_g, e.ln2_b);
  }
  return ad::mean_row_groups(h, steps_);
}

Tensor SequenceModel::features(const Tensor& x, std::size_t batch, bool train, Rng& rng,
                               AttentionTrace* trace) const {
  if (x.rows() != batch * steps_ || x.cols() != channels_) {
    throw Error(ErrorKind::ShapeMismatch, "expected input [" + std::to_string(batch * steps_) +
                                              ", " + std::to_string(channels_) + "], got " +
                                              ad::to_string(x.shape()));
  }
  if (is_recurrent(cfg_.kind)) return recurrent_features(x, batch, train, rng, trace);
  return transformer_features(x, batch, train, rng, trace);
}

Tensor SequenceModel::head(const Tensor& f) const { return ad::affine(f, head_w, head_b); }

Tensor SequenceModel::logits(const Tensor& x, std::size_t batch, bool train, Rng& rng,
                             AttentionTrace* trace) const {
  return head(features(x, batch, train, rng, trace));
}

std::vector<Tensor> SequenceModel::all_tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

std::vector<Tensor> SequenceModel::extractor_tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) {
    if (!p.head) out.push_back(p.tensor);
  }
  return out;
}

std::vector<Tensor> SequenceModel::head_tensors() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) {
    if (p.head) out.push_back(p.tensor);
  }
  return out;
}

std::size_t SequenceModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

std::vector<std::vector<double>> SequenceModel::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(params_.size());
  for (const auto& p : params_) {
    const auto v = p.tensor.value();
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

void SequenceModel::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != params_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "parameter count mismatch on restore");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto dst = params_[i].tensor.mutable_value();
    if (dst.size() != values[i].size()) {
      throw Error(ErrorKind::ShapeMismatch, "parameter " + params_[i].name + " size mismatch");
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

SequenceModel SequenceModel::clone() const {
  SequenceModel copy(cfg_, channels_, steps_);
  copy.restore(snapshot());
  return copy;
}

void SequenceModel::zero_head() {
  for (auto& p : params_) {
    if (p.head) {
      for (double& v : p.tensor.mutable_value()) v = 0.0;
    }
  }
}

}  // namespace cropflow
