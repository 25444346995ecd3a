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

#include "cropflow/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cropflow/error.hpp"

namespace cropflow {

void to_json(nlohmann::json& j, const EpochLog& e) {
  j = nlohmann::json{{"stage", e.stage},       {"epoch", e.epoch},     {"train_loss", e.train_loss},
                     {"val_loss", e.val_loss}, {"val_acc", e.val_acc}, {"lr", e.lr}};
  if (e.domain_acc) j["domain_acc"] = *e.domain_acc;
}

void from_json(const nlohmann::json& j, EpochLog& e) {
  e.stage = j.at("stage").get<std::string>();
  e.epoch = j.at("epoch").get<std::size_t>();
  e.train_loss = j.at("train_loss").get<double>();
  e.val_loss = j.at("val_loss").get<double>();
  e.val_acc = j.at("val_acc").get<double>();
  e.lr = j.at("lr").get<double>();
  if (j.contains("domain_acc")) e.domain_acc = j.at("domain_acc").get<double>();
}

TrainOptions TrainOptions::from(const ModelConfig& cfg) {
  TrainOptions o;
  o.epochs = cfg.epochs;
  o.batch_size = cfg.batch_size;
  o.lr = cfg.lr;
  o.lr_factor = cfg.lr_factor;
  o.lr_patience = cfg.lr_patience;
  o.seed = cfg.seed;
  return o;
}

ad::Tensor batch_tensor(const SampleMatrix& m, std::span<const std::size_t> rows) {
  std::vector<double> v;
  v.reserve(rows.size() * m.width());
  for (std::size_t r : rows) {
    const auto row = m.row(r);
    v.insert(v.end(), row.begin(), row.end());
  }
  return ad::Tensor::from({rows.size() * m.steps, m.channels}, std::move(v));
}

int argmax(const Probabilities& p) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c) {
    if (p[c] > p[best]) best = c;
  }
  return static_cast<int>(best);
}

std::array<double, kNumClasses> inverse_frequency_weights(std::span<const int> labels) {
  std::array<double, kNumClasses> counts{};
  for (int y : labels) counts.at(static_cast<std::size_t>(y)) += 1.0;
  std::array<double, kNumClasses> w{};
  double total = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (counts[c] == 0.0) {
      throw Error(ErrorKind::EmptyClass,
                  "class " + std::string(class_name(kAllClasses[c])) + " has no samples");
    }
    w[c] = 1.0 / counts[c];
    total += w[c];
  }
  for (double& v : w) v *= static_cast<double>(kNumClasses) / total;
  return w;
}

namespace {

std::vector<std::size_t> chunk_rows(std::size_t begin, std::size_t end) {
  std::vector<std::size_t> rows(end - begin);
  std::iota(rows.begin(), rows.end(), begin);
  return rows;
}

std::vector<std::size_t> weighted_draw(const SampleMatrix& m, std::span<const double> class_w,
                                       Rng& rng) {
  std::vector<double> cum(m.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    acc += class_w[static_cast<std::size_t>(m.y[i])];
    cum[i] = acc;
  }
  std::vector<std::size_t> out(m.size());
  for (auto& o : out) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cum.begin(), cum.end(), u);
    o = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), m.size() - 1);
  }
  return out;
}

}  // namespace

std::vector<Probabilities> predict_proba(const SequenceModel& model, const SampleMatrix& m,
                                         Exec exec, std::size_t chunk) {
  if (m.size() > 0 && (m.steps != model.steps() || m.channels != model.channels())) {
    throw Error(ErrorKind::ShapeMismatch, "input shape does not match the model");
  }
  std::vector<Probabilities> out(m.size());
  const std::size_t chunks = (m.size() + chunk - 1) / chunk;
  for_each_index(chunks, exec, [&](std::size_t k) {
    const std::size_t begin = k * chunk;
    const std::size_t end = std::min(m.size(), begin + chunk);
    const auto rows = chunk_rows(begin, end);
    Rng unused(0);
    const ad::Tensor p =
        ad::softmax(model.logits(batch_tensor(m, rows), rows.size(), false, unused));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < kNumClasses; ++c) out[begin + i][c] = p.at(i, c);
    }
  });
  return out;
}

std::pair<double, double> evaluate_loss(const SequenceModel& model, const SampleMatrix& m,
                                        Exec exec) {
  if (m.size() == 0) return {0.0, 0.0};
  constexpr std::size_t chunk = 512;
  const std::size_t chunks = (m.size() + chunk - 1) / chunk;
  std::vector<double> loss(chunks, 0.0);
  std::vector<std::size_t> correct(chunks, 0);
  for_each_index(chunks, exec, [&](std::size_t k) {
    const std::size_t begin = k * chunk;
    const std::size_t end = std::min(m.size(), begin + chunk);
    const auto rows = chunk_rows(begin, end);
    Rng unused(0);
    const ad::Tensor logits = model.logits(batch_tensor(m, rows), rows.size(), false, unused);
    const std::span<const int> y(m.y.data() + begin, rows.size());
    loss[k] = ad::cross_entropy(logits, y).item() * static_cast<double>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      Probabilities row{};
      for (std::size_t c = 0; c < kNumClasses; ++c) row[c] = logits.at(i, c);
      if (argmax(row) == y[i]) ++correct[k];
    }
  });
  double total_loss = 0.0;
  std::size_t total_correct = 0;
  for (std::size_t k = 0; k < chunks; ++k) {
    total_loss += loss[k];
    total_correct += correct[k];
  }
  const double n = static_cast<double>(m.size());
  return {total_loss / n, static_cast<double>(total_correct) / n};
}

TrainResult fit_sequence(SequenceModel& model, const SampleMatrix& train, const SampleMatrix& val,
                         const TrainOptions& opts, TrainHook* hook) {
  if (train.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "training split is empty");
  if (val.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "validation split is empty");
  if (opts.batch_size == 0) throw Error(ErrorKind::Config, "batch_size must be positive");
  if (train.steps != model.steps() || train.channels != model.channels() ||
      val.steps != model.steps() || val.channels != model.channels()) {
    throw Error(ErrorKind::ShapeMismatch, "training data shape does not match the model");
  }

  std::vector<ad::Tensor> trainable = opts.head_only ? model.head_tensors() : model.all_tensors();
  std::vector<ad::Tensor> every = model.all_tensors();
  if (hook) {
    for (const auto& t : hook->parameters()) {
      trainable.push_back(t);
      every.push_back(t);
    }
  }
  ad::Adam optimizer(trainable, ad::AdamConfig{opts.lr, 0.9, 0.999, 1e-8});
  ad::PlateauScheduler scheduler(opts.lr_factor, opts.lr_patience);

  std::vector<double> class_w = opts.class_weights;
  if (!class_w.empty() && class_w.size() != kNumClasses) {
    throw Error(ErrorKind::Config, "class_weights needs one entry per class");
  }
  std::vector<double> sampler_w = class_w;
  if (opts.sampling == Sampling::ClassWeighted && sampler_w.empty()) {
    const auto w = inverse_frequency_weights(train.y);
    sampler_w.assign(w.begin(), w.end());
  }

  Rng order_rng(mix_seed(opts.seed, 11));
  Rng dropout_rng(mix_seed(opts.seed, 12));
  const std::size_t batches = (train.size() + opts.batch_size - 1) / opts.batch_size;
  const double total_steps = static_cast<double>(opts.epochs * batches);

  TrainResult result;
  result.best_val_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best = model.snapshot();

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    std::vector<std::size_t> order;
    if (opts.sampling == Sampling::ClassWeighted) {
      order = weighted_draw(train, sampler_w, order_rng);
    } else {
      order = random_permutation(train.size(), order_rng);
    }
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * opts.batch_size;
      const std::size_t end = std::min(order.size(), begin + opts.batch_size);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      std::vector<int> y;
      y.reserve(rows.size());
      for (std::size_t r : rows) y.push_back(train.y[r]);

      const ad::Tensor f =
          model.features(batch_tensor(train, rows), rows.size(), true, dropout_rng);
      const ad::Tensor ce = ad::cross_entropy(model.head(f), y, class_w);
      ad::Tensor loss = ce;
      if (hook) {
        const double progress = static_cast<double>(epoch * batches + b) / total_steps;
        loss = ad::add(ce, hook->extra_loss(model, f, progress));
      }
      if (!std::isfinite(loss.item())) {
        throw Error(ErrorKind::NonFiniteLoss, "loss became non-finite in epoch " +
                                                  std::to_string(epoch + 1));
      }
      for (auto& t : every) t.zero_grad();
      ad::backward(loss);
      optimizer.step();
      loss_sum += ce.item() * static_cast<double>(rows.size());
    }

    EpochLog entry;
    entry.stage = opts.stage;
    entry.epoch = epoch + 1;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    std::tie(entry.val_loss, entry.val_acc) = evaluate_loss(model, val);
    entry.lr = optimizer.lr();
    if (hook) entry.domain_acc = hook->epoch_metric(model);
    if (!std::isfinite(entry.val_loss)) {
      throw Error(ErrorKind::NonFiniteLoss, "validation loss became non-finite");
    }
    if (entry.val_loss < result.best_val_loss) {
      result.best_val_loss = entry.val_loss;
      result.best_epoch = entry.epoch;
      best = model.snapshot();
    }
    optimizer.set_lr(scheduler.observe(entry.val_loss, optimizer.lr()));
    result.log.push_back(std::move(entry));
  }
  model.restore(best);
  return result;
}

}  // namespace cropflow
