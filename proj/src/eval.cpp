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

#include "cropflow/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "cropflow/error.hpp"
#include "cropflow/io.hpp"
#include "cropflow/rng.hpp"

namespace cropflow {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

FoldMetrics score(std::span<const int> predictions, std::span<const int> truths) {
  if (predictions.size() != truths.size()) {
    throw Error(ErrorKind::LengthMismatch, std::to_string(predictions.size()) +
                                               " predictions for " +
                                               std::to_string(truths.size()) + " truths");
  }
  if (truths.empty()) throw Error(ErrorKind::LengthMismatch, "nothing to score");
  FoldMetrics m;
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const int t = truths[i];
    const int p = predictions[i];
    if (t < 0 || t >= static_cast<int>(kNumClasses) || p < 0 || p >= static_cast<int>(kNumClasses)) {
      throw Error(ErrorKind::InvalidTarget, "class index out of range");
    }
    ++counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
    if (t == p) ++correct;
  }
  m.overall_accuracy = static_cast<double>(correct) / static_cast<double>(truths.size());
  for (std::size_t r = 0; r < kNumClasses; ++r) {
    const std::size_t support = std::accumulate(counts[r].begin(), counts[r].end(), std::size_t{0});
    m.support[r] = support;
    if (support == 0) continue;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      m.confusion[r][c] = static_cast<double>(counts[r][c]) / static_cast<double>(support);
    }
    m.class_accuracy[r] = m.confusion[r][r];
  }
  return m;
}

std::vector<std::size_t> kfold_split(std::span<const int> labels, std::size_t k,
                                     std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::Config, "k must be at least 2");
  if (labels.size() < k) {
    throw Error(ErrorKind::TooFewSamples, std::to_string(labels.size()) + " samples for " +
                                              std::to_string(k) + " folds");
  }
  std::vector<std::size_t> fold(labels.size());
  std::size_t dealt = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == static_cast<int>(c)) members.push_back(i);
    }
    Rng rng(mix_seed(seed, c));
    rng.shuffle(members);
    for (std::size_t i : members) fold[i] = dealt++ % k;
  }
  return fold;
}

double trimmed_fold_mean(std::span<const double> values) {
  if (values.size() < 3) {
    throw Error(ErrorKind::TooFewValues, "trimmed mean needs at least 3 values, got " +
                                             std::to_string(values.size()));
  }
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  // Neumaier summation so that fixtures such as eight 0.9s come back exact.
  double s = 0.0, comp = 0.0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const double t = s + v[i];
    comp += std::abs(s) >= std::abs(v[i]) ? (s - t) + v[i] : (v[i] - t) + s;
    s = t;
  }
  return (s + comp) / static_cast<double>(v.size() - 2);
}

namespace {

double aggregate(std::span<const double> v) {
  if (v.empty()) return 0.0;
  if (v.size() >= 3) return trimmed_fold_mean(v);
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double EvalReport::aggregate_oa() const {
  std::vector<double> v;
  for (const auto& f : folds) v.push_back(f.metrics.overall_accuracy);
  return aggregate(v);
}

ClassArray EvalReport::aggregate_class_accuracy() const {
  ClassArray out{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::vector<double> v;
    for (const auto& f : folds) v.push_back(f.metrics.class_accuracy[c]);
    out[c] = aggregate(v);
  }
  return out;
}

nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    nlohmann::json acc;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      acc[std::string(class_name(kAllClasses[c]))] = f.metrics.class_accuracy[c];
    }
    folds.push_back({{"fold", f.fold},
                     {"n_train", f.n_train},
                     {"n_test", f.n_test},
                     {"overall_accuracy", f.metrics.overall_accuracy},
                     {"class_accuracy", acc},
                     {"confusion", f.metrics.confusion},
                     {"support", f.metrics.support}});
  }
  nlohmann::json agg_acc;
  const auto ca = r.aggregate_class_accuracy();
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    agg_acc[std::string(class_name(kAllClasses[c]))] = ca[c];
  }
  return {{"schema", kEvalSchema},
          {"model", r.model},
          {"fingerprint", r.fingerprint},
          {"seed", r.seed},
          {"folds", folds},
          {"aggregate", {{"overall_accuracy", r.aggregate_oa()}, {"class_accuracy", agg_acc}}}};
}

EvalReport report_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kEvalSchema) {
      throw Error(ErrorKind::Parse, "unsupported report schema " + j.at("schema").dump());
    }
    EvalReport r;
    r.model = j.at("model").get<std::string>();
    r.fingerprint = j.at("fingerprint").get<Fingerprint>();
    r.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& jf : j.at("folds")) {
      FoldReport f;
      f.fold = jf.at("fold").get<std::size_t>();
      f.n_train = jf.at("n_train").get<std::size_t>();
      f.n_test = jf.at("n_test").get<std::size_t>();
      f.metrics.overall_accuracy = jf.at("overall_accuracy").get<double>();
      for (std::size_t c = 0; c < kNumClasses; ++c) {
        f.metrics.class_accuracy[c] =
            jf.at("class_accuracy").at(std::string(class_name(kAllClasses[c]))).get<double>();
      }
      f.metrics.confusion = jf.at("confusion").get<std::array<ClassArray, kNumClasses>>();
      f.metrics.support = jf.at("support").get<std::array<std::size_t, kNumClasses>>();
      r.folds.push_back(f);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("eval report: ") + e.what());
  }
}

nlohmann::json timings_json(const EvalReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"train_seconds", f.train_seconds},
                     {"predict_seconds", f.predict_seconds}});
  }
  return {{"schema", "cropflow.timings/1"}, {"model", r.model}, {"folds", folds}};
}

std::string report_csv(const EvalReport& r) {
  std::string out = "model,fold,n_test,overall_accuracy,corn_accuracy,soybean_accuracy,other_accuracy\n";
  const auto row = [&](const std::string& fold, std::size_t n, double oa, const ClassArray& ca) {
    out += r.model + "," + fold + "," + std::to_string(n) + "," + io::format_double(oa);
    for (double v : ca) out += "," + io::format_double(v);
    out += "\n";
  };
  std::size_t total = 0;
  for (const auto& f : r.folds) {
    row(std::to_string(f.fold), f.n_test, f.metrics.overall_accuracy, f.metrics.class_accuracy);
    total += f.n_test;
  }
  row("aggregate", total, r.aggregate_oa(), r.aggregate_class_accuracy());
  return out;
}

FoldReport evaluate(const ModelArtifact& a, const SampleMatrix& test, Exec exec) {
  FoldReport f;
  f.n_test = test.size();
  const auto start = std::chrono::steady_clock::now();
  const auto pred = artifact_predict(a, test, exec);
  f.predict_seconds = seconds_since(start);
  f.metrics = score(pred, test.y);
  return f;
}

EvalReport cross_validate(const ModelConfig& cfg, const LabeledDataset& data, std::size_t k,
                          std::uint64_t seed, Exec exec) {
  const auto all = data.all_indices();
  const auto labels = data.labels(all);
  const auto folds = kfold_split(labels, k, seed);
  const Fingerprint fp = data.fingerprint();
  const SampleMatrix full = to_matrix(data, all);

  EvalReport report;
  report.model = std::string(model_kind_name(cfg.kind));
  report.fingerprint = fp;
  report.seed = seed;
  report.folds.resize(k);
  for_each_index(k, exec, [&](std::size_t i) {
    std::vector<std::size_t> tr, va, te;
    for (std::size_t s = 0; s < folds.size(); ++s) {
      if (folds[s] == i) {
        te.push_back(s);
      } else if (folds[s] == (i + 1) % k) {
        va.push_back(s);
      } else {
        tr.push_back(s);
      }
    }
    const auto start = std::chrono::steady_clock::now();
    const ModelArtifact a = train_artifact(cfg, fp, subset(full, tr), subset(full, va), exec);
    const double train_seconds = seconds_since(start);
    FoldReport f = evaluate(a, subset(full, te), exec);
    f.fold = i;
    f.n_train = tr.size();
    f.train_seconds = train_seconds;
    report.folds[i] = f;
  });
  return report;
}

}  // namespace cropflow
