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

#include "cropflow/forest.hpp"

#include <algorithm>
#include <numeric>

#include "cropflow/error.hpp"

namespace cropflow {

int DecisionTree::predict(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    const auto& n = nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return nodes[i].label;
}

std::size_t DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  std::vector<std::size_t> d(nodes.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

int majority(const Votes& v) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (v[c] > v[best]) best = c;
  }
  return static_cast<int>(best);
}

Votes RandomForest::votes(std::span<const double> x) const {
  if (x.size() != width) {
    throw Error(ErrorKind::ShapeMismatch, "forest expects " + std::to_string(width) +
                                              " features, got " + std::to_string(x.size()));
  }
  Votes v{};
  for (const auto& t : trees) ++v[static_cast<std::size_t>(t.predict(x))];
  return v;
}

int RandomForest::predict(std::span<const double> x) const { return majority(votes(x)); }

std::vector<int> RandomForest::predict_all(const SampleMatrix& m, Exec exec) const {
  if (m.width() != width) {
    throw Error(ErrorKind::ShapeMismatch, "forest expects " + std::to_string(width) +
                                              " features, got " + std::to_string(m.width()));
  }
  std::vector<int> out(m.size());
  for_each_index(m.size(), exec, [&](std::size_t i) { out[i] = predict(m.row(i)); });
  return out;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // weighted child impurity times n
};

double gini_mass(const Votes& c, double n) {
  if (n <= 0) return 0.0;
  double s = 0.0;
  for (std::size_t k : c) s += static_cast<double>(k) * static_cast<double>(k);
  return n - s / n;  // n * (1 - sum p^2)
}

class Grower {
 public:
  Grower(const SampleMatrix& m, std::size_t max_features, Rng& rng)
      : m_(m), max_features_(std::max<std::size_t>(1, std::min(max_features, m.width()))),
        rng_(rng), features_(m.width()) {
    std::iota(features_.begin(), features_.end(), 0);
  }

  DecisionTree grow(std::vector<std::size_t> rows) {
    tree_.nodes.clear();
    build(rows, 0, rows.size());
    return std::move(tree_);
  }

 private:
  std::int32_t build(std::vector<std::size_t>& rows, std::size_t lo, std::size_t hi) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    Votes counts{};
    for (std::size_t i = lo; i < hi; ++i) ++counts[static_cast<std::size_t>(m_.y[rows[i]])];
    tree_.nodes[static_cast<std::size_t>(id)].label = majority(counts);
    const std::size_t n = hi - lo;
    const bool pure = std::count(counts.begin(), counts.end(), std::size_t{0}) == kNumClasses - 1;
    if (n < 2 || pure) return id;

    const Split s = best_split(rows, lo, hi, counts);
    if (s.feature < 0) return id;

    const auto mid_it = std::partition(
        rows.begin() + static_cast<std::ptrdiff_t>(lo), rows.begin() + static_cast<std::ptrdiff_t>(hi),
        [&](std::size_t r) { return value(r, static_cast<std::size_t>(s.feature)) <= s.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - rows.begin());
    const std::int32_t left = build(rows, lo, mid);
    const std::int32_t right = build(rows, mid, hi);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  double value(std::size_t row, std::size_t f) const { return m_.x[row * m_.width() + f]; }

  Split best_split(const std::vector<std::size_t>& rows, std::size_t lo, std::size_t hi,
                   const Votes& total) {
    const std::size_t n = hi - lo;
    const double parent = gini_mass(total, static_cast<double>(n));
    Split best;
    best.score = parent;
    buf_.resize(n);
    std::size_t visited = 0;
    // Partial Fisher-Yates: features are drawn lazily until enough
    // non-constant ones have been scored.
    for (std::size_t k = 0; k < features_.size() && visited < max_features_; ++k) {
      const std::size_t j = k + rng_.uniform_index(features_.size() - k);
      std::swap(features_[k], features_[j]);
      const std::size_t f = features_[k];
      for (std::size_t i = 0; i < n; ++i) {
        buf_[i] = {value(rows[lo + i], f), m_.y[rows[lo + i]]};
      }
      std::sort(buf_.begin(), buf_.end());
      if (buf_.front().first == buf_.back().first) continue;
      ++visited;
      Votes left{};
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[static_cast<std::size_t>(buf_[i].second)];
        if (buf_[i].first == buf_[i + 1].first) continue;
        Votes right{};
        for (std::size_t c = 0; c < kNumClasses; ++c) right[c] = total[c] - left[c];
        const double nl = static_cast<double>(i + 1);
        const double score = gini_mass(left, nl) + gini_mass(right, static_cast<double>(n) - nl);
        if (score < best.score - 1e-12) {
          best.score = score;
          best.feature = static_cast<int>(f);
          best.threshold = 0.5 * (buf_[i].first + buf_[i + 1].first);
          // Guard against the midpoint rounding onto the upper value.
          if (!(best.threshold < buf_[i + 1].first)) best.threshold = buf_[i].first;
        }
      }
    }
    return best;
  }

  const SampleMatrix& m_;
  std::size_t max_features_;
  Rng& rng_;
  std::vector<std::size_t> features_;
  std::vector<std::pair<double, int>> buf_;
  DecisionTree tree_;
};

}  // namespace

DecisionTree grow_tree(const SampleMatrix& m, std::span<const std::size_t> rows,
                       std::size_t max_features, Rng& rng) {
  if (rows.empty()) throw Error(ErrorKind::EmptyTrainSet, "cannot grow a tree on no samples");
  Grower g(m, max_features, rng);
  return g.grow(std::vector<std::size_t>(rows.begin(), rows.end()));
}

RandomForest train_forest(const SampleMatrix& m, const ForestConfig& cfg, Exec exec) {
  if (m.size() == 0) throw Error(ErrorKind::EmptyTrainSet, "random forest needs training samples");
  if (cfg.n_estimators == 0) throw Error(ErrorKind::Config, "n_estimators must be positive");
  RandomForest forest;
  forest.width = m.width();
  forest.trees.resize(cfg.n_estimators);
  for_each_index(cfg.n_estimators, exec, [&](std::size_t t) {
    Rng rng(mix_seed(cfg.seed, t));
    std::vector<std::size_t> rows(m.size());
    for (auto& r : rows) r = rng.uniform_index(m.size());
    forest.trees[t] = grow_tree(m, rows, cfg.max_features, rng);
  });
  return forest;
}

}  // namespace cropflow
