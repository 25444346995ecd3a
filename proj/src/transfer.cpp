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

#include "cropflow/transfer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cropflow/error.hpp"

namespace cropflow {

EvalReport direct_transfer_eval(const ModelArtifact& model, const LabeledDataset& target_test,
                                Exec exec) {
  const Fingerprint fp = target_test.fingerprint();
  require_fingerprint(model.fingerprint, fp, "target test set");
  EvalReport r;
  r.model = std::string(model_kind_name(model.config.kind));
  r.fingerprint = fp;
  r.seed = model.config.seed;
  r.folds.push_back(evaluate(model, to_matrix(target_test, target_test.all_indices()), exec));
  r.folds.back().n_train = 0;
  return r;
}

std::string_view strategy_name(FinetuneStrategy s) {
  switch (s) {
    case FinetuneStrategy::R1:
      return "R1";
    case FinetuneStrategy::R2:
      return "R2";
    case FinetuneStrategy::R3:
      return "R3";
    case FinetuneStrategy::R4:
      return "R4";
  }
  return "R1";
}

std::optional<FinetuneStrategy> parse_strategy(std::string_view name) {
  for (auto s : {FinetuneStrategy::R1, FinetuneStrategy::R2, FinetuneStrategy::R3,
                 FinetuneStrategy::R4}) {
    const auto n = strategy_name(s);
    if (name == n || (name.size() == 2 && name[0] == 'r' && name[1] == n[1])) return s;
  }
  return std::nullopt;
}

std::vector<std::size_t> undersample_balanced(std::span<const int> labels, std::uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members.at(static_cast<std::size_t>(labels[i])).push_back(i);
  }
  std::size_t minority = labels.size();
  for (const auto& m : members) minority = std::min(minority, m.size());
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    Rng rng(mix_seed(seed, c));
    rng.shuffle(members[c]);
    out.insert(out.end(), members[c].begin(),
               members[c].begin() + static_cast<std::ptrdiff_t>(minority));
  }
  std::sort(out.begin(), out.end());
  return out;
}

FinetuneResult fine_tune(const ModelArtifact& pretrained, const SampleMatrix& target_train,
                         const SampleMatrix& target_val, const FinetuneConfig& cfg) {
  if (pretrained.is_forest()) {
    throw Error(ErrorKind::UnsupportedModelKind, "random forests cannot be fine-tuned");
  }
  const auto weights = inverse_frequency_weights(target_train.y);
  SequenceModel model = instantiate(pretrained);
  const SampleMatrix train = pretrained.norm.apply(target_train);
  const SampleMatrix val = pretrained.norm.apply(target_val);

  TrainOptions base = TrainOptions::from(pretrained.config);
  base.lr = cfg.lr;
  base.batch_size = cfg.batch_size;
  base.seed = cfg.seed;
  base.epochs = cfg.epochs;
  base.stage = std::string(strategy_name(cfg.strategy));

  TrainOptions weighted = base;
  weighted.class_weights.assign(weights.begin(), weights.end());
  weighted.sampling = Sampling::ClassWeighted;

  const auto balanced = [&] {
    return subset(train, undersample_balanced(train.y, mix_seed(cfg.seed, 31)));
  };

  FinetuneResult out;
  std::vector<EpochLog> log;
  switch (cfg.strategy) {
    case FinetuneStrategy::R1:
      log = fit_sequence(model, train, val, base).log;
      break;
    case FinetuneStrategy::R2:
      log = fit_sequence(model, train, val, weighted).log;
      break;
    case FinetuneStrategy::R3:
      log = fit_sequence(model, balanced(), val, base).log;
      break;
    case FinetuneStrategy::R4: {
      TrainOptions first = base;
      first.epochs = cfg.stage_epochs;
      first.stage = "R4-stage1";
      const TrainResult one = fit_sequence(model, balanced(), val, first);
      out.stage_one_params = model.snapshot();

      TrainOptions second = weighted;
      second.epochs = cfg.stage_epochs;
      second.stage = "R4-stage2";
      second.head_only = true;
      second.seed = mix_seed(cfg.seed, 2);
      const TrainResult two = fit_sequence(model, train, val, second);
      if (one.best_val_loss <= two.best_val_loss) model.restore(out.stage_one_params);
      log = one.log;
      log.insert(log.end(), two.log.begin(), two.log.end());
      break;
    }
  }
  out.artifact = pretrained;
  out.artifact.log = std::move(log);
  capture_parameters(out.artifact, model);
  out.artifact.notes["finetune"] = {{"strategy", strategy_name(cfg.strategy)},
                                    {"lr", cfg.lr},
                                    {"batch_size", cfg.batch_size},
                                    {"seed", cfg.seed}};
  return out;
}

UnlabeledSet UnlabeledSet::from(std::span<const RegularSeries> series) {
  UnlabeledSet u;
  if (series.empty()) return u;
  u.fingerprint = fingerprint_of(series.front());
  for (const auto& s : series) {
    if (!(fingerprint_of(s) == u.fingerprint)) {
      throw Error(ErrorKind::ShapeMismatch, "unlabeled set mixes series shapes");
    }
    u.x.insert(u.x.end(), s.values.begin(), s.values.end());
  }
  return u;
}

double grl_lambda(LambdaSchedule schedule, double scale, double progress) {
  if (schedule == LambdaSchedule::Constant) return scale;
  return scale * (2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0);
}

namespace {

class DomainHook final : public TrainHook {
 public:
  DomainHook(std::size_t feature_dim, const DannConfig& cfg, const SampleMatrix& target,
             const SampleMatrix& source_eval, const SampleMatrix& target_eval)
      : cfg_(cfg), target_(target), source_eval_(source_eval), target_eval_(target_eval),
        order_rng_(mix_seed(cfg.model.seed, 41)), dropout_rng_(mix_seed(cfg.model.seed, 42)) {
    Rng init(mix_seed(cfg.model.seed, 43));
    const double b1 = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    const double b2 = 1.0 / std::sqrt(static_cast<double>(cfg.domain_hidden));
    w1_ = ad::Tensor::uniform({feature_dim, cfg.domain_hidden}, b1, init);
    b1_ = ad::Tensor::uniform({1, cfg.domain_hidden}, b1, init);
    w2_ = ad::Tensor::uniform({cfg.domain_hidden, 2}, b2, init);
    b2_ = ad::Tensor::uniform({1, 2}, b2, init);
  }

  std::vector<ad::Tensor> parameters() const override { return {w1_, b1_, w2_, b2_}; }

  ad::Tensor extra_loss(const SequenceModel& model, const ad::Tensor& source_features,
                        double progress) override {
    const std::size_t b = source_features.rows();
    const auto rows = next_target_rows(b);
    const ad::Tensor tf = model.features(batch_tensor(target_, rows), b, true, dropout_rng_);
    const ad::Tensor both[] = {source_features, tf};
    const double lambda = grl_lambda(cfg_.schedule, cfg_.lambda_scale, progress);
    const ad::Tensor z = ad::gradient_reversal(ad::concat_rows(both), lambda);
    std::vector<int> domain(2 * b, 0);
    std::fill(domain.begin() + static_cast<std::ptrdiff_t>(b), domain.end(), 1);
    return ad::cross_entropy(domain_logits(z), domain);
  }

  std::optional<double> epoch_metric(const SequenceModel& model) override {
    if (source_eval_.size() == 0 || target_eval_.size() == 0) return std::nullopt;
    const std::size_t correct =
        count_domain(model, source_eval_, 0) + count_domain(model, target_eval_, 1);
    return static_cast<double>(correct) /
           static_cast<double>(source_eval_.size() + target_eval_.size());
  }

 private:
  ad::Tensor domain_logits(const ad::Tensor& z) const {
    return ad::affine(ad::relu(ad::affine(z, w1_, b1_)), w2_, b2_);
  }

  std::vector<std::size_t> next_target_rows(std::size_t n) {
    std::vector<std::size_t> rows;
    rows.reserve(n);
    while (rows.size() < n) {
      if (cursor_ >= perm_.size()) {
        perm_ = random_permutation(target_.size(), order_rng_);
        cursor_ = 0;
      }
      rows.push_back(perm_[cursor_++]);
    }
    return rows;
  }

  std::size_t count_domain(const SequenceModel& model, const SampleMatrix& m, int domain) const {
    std::size_t correct = 0;
    constexpr std::size_t chunk = 512;
    Rng unused(0);
    for (std::size_t begin = 0; begin < m.size(); begin += chunk) {
      const std::size_t end = std::min(m.size(), begin + chunk);
      std::vector<std::size_t> rows(end - begin);
      std::iota(rows.begin(), rows.end(), begin);
      const ad::Tensor logits =
          domain_logits(model.features(batch_tensor(m, rows), rows.size(), false, unused));
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const int pred = logits.at(i, 1) > logits.at(i, 0) ? 1 : 0;
        if (pred == domain) ++correct;
      }
    }
    return correct;
  }

  const DannConfig& cfg_;
  const SampleMatrix& target_;
  const SampleMatrix& source_eval_;
  const SampleMatrix& target_eval_;
  Rng order_rng_;
  Rng dropout_rng_;
  std::vector<std::size_t> perm_;
  std::size_t cursor_ = 0;
  ad::Tensor w1_, b1_, w2_, b2_;
};

SampleMatrix head_rows(const SampleMatrix& m, std::size_t n) {
  std::vector<std::size_t> rows(std::min(n, m.size()));
  std::iota(rows.begin(), rows.end(), 0);
  return subset(m, rows);
}

}  // namespace

DannResult dann_train(const Fingerprint& fp, const SampleMatrix& source_train,
                      const SampleMatrix& source_val, const UnlabeledSet& target,
                      const DannConfig& cfg) {
  cfg.model.validate();
  if (cfg.model.kind == ModelKind::RF) {
    throw Error(ErrorKind::UnsupportedModelKind, "adversarial adaptation needs a sequence model");
  }
  require_fingerprint(fp, target.fingerprint, "adaptation target");
  if (source_train.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "source train split is empty");
  if (target.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "no target samples to adapt to");
  if (source_train.steps != fp.steps || source_train.channels != fp.channels.size()) {
    throw Error(ErrorKind::ShapeMismatch, "source matrix does not match " + fp.describe());
  }

  DannResult out;
  ModelArtifact& a = out.artifact;
  a.config = cfg.model;
  a.fingerprint = fp;
  a.norm = NormalizationStats::fit(source_train);
  const SampleMatrix train = a.norm.apply(source_train);
  const SampleMatrix val = a.norm.apply(source_val);
  SampleMatrix target_raw;
  target_raw.steps = fp.steps;
  target_raw.channels = fp.channels.size();
  target_raw.x = target.x;
  target_raw.y.assign(target.size(), 0);
  const SampleMatrix tgt = a.norm.apply(target_raw);

  const std::size_t n_eval = std::min(val.size(), tgt.size());
  const SampleMatrix source_eval = head_rows(val, n_eval);
  const SampleMatrix target_eval = head_rows(tgt, n_eval);

  SequenceModel model(cfg.model, fp.channels.size(), fp.steps);
  DomainHook hook(model.feature_dim(), cfg, tgt, source_eval, target_eval);
  TrainOptions opts = TrainOptions::from(cfg.model);
  opts.stage = "dann";
  const TrainResult result = fit_sequence(model, train, val, opts, &hook);
  a.log = result.log;
  capture_parameters(a, model);
  if (result.best_epoch > 0) {
    out.domain_accuracy = result.log[result.best_epoch - 1].domain_acc.value_or(0.0);
  }
  a.notes["dann"] = {
      {"domain_hidden", cfg.domain_hidden},
      {"schedule", cfg.schedule == LambdaSchedule::Progressive ? "progressive" : "constant"},
      {"lambda_scale", cfg.lambda_scale},
      {"target_samples", target.size()},
      {"domain_accuracy", out.domain_accuracy}};
  return out;
}

namespace {

std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  h ^= 0xff;  // separator
  h *= 0x100000001b3ULL;
  return h;
}

// Per-class quotas summing to `quota`, proportional to `counts` with the
// leftover going to the largest remainders (lowest class on ties).
std::array<std::size_t, kNumClasses> proportional_quota(
    const std::array<std::size_t, kNumClasses>& counts, std::size_t quota) {
  const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::array<std::size_t, kNumClasses> q{};
  std::array<std::size_t, kNumClasses> rem{};
  std::size_t given = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    q[c] = quota * counts[c] / n;
    rem[c] = quota * counts[c] % n;
    given += q[c];
  }
  while (given < quota) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kNumClasses; ++c) {
      if (rem[c] > rem[best]) best = c;
    }
    ++q[best];
    rem[best] = 0;
    ++given;
  }
  return q;
}

}  // namespace

LabeledDataset multi_source_compose(std::span<const LabeledDataset> domains, std::size_t total,
                                    std::uint64_t seed) {
  if (domains.empty()) throw Error(ErrorKind::InsufficientSamples, "no source domains given");
  const Fingerprint fp = domains.front().fingerprint();
  for (std::size_t d = 1; d < domains.size(); ++d) {
    require_fingerprint(fp, domains[d].fingerprint(), "domain " + std::to_string(d));
  }
  const std::size_t k = domains.size();
  LabeledDataset out;
  for (std::size_t d = 0; d < k; ++d) {
    const LabeledDataset& dom = domains[d];
    const std::size_t quota = total / k + (d < total % k ? 1 : 0);
    if (dom.size() < quota) {
      throw Error(ErrorKind::InsufficientSamples,
                  "domain " + std::to_string(d) + " has " + std::to_string(dom.size()) +
                      " samples, needs " + std::to_string(quota));
    }
    if (quota == 0) continue;
    std::vector<std::size_t> all = dom.all_indices();
    std::sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) {
      return dom.items[a].series.pixel_id < dom.items[b].series.pixel_id;
    });
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i : all) h = fnv1a(h, dom.items[i].series.pixel_id);
    const auto per_class = proportional_quota(dom.class_counts(all), quota);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      std::vector<std::size_t> members;
      for (std::size_t i : all) {
        if (class_index(dom.items[i].label) == static_cast<int>(c)) members.push_back(i);
      }
      Rng rng(mix_seed(mix_seed(seed, h), c));
      rng.shuffle(members);
      for (std::size_t j = 0; j < per_class[c]; ++j) {
        LabeledSample s = dom.items[members[j]];
        s.provenance = "domain" + std::to_string(d);
        out.items.push_back(std::move(s));
      }
    }
  }
  return out;
}

}  // namespace cropflow
