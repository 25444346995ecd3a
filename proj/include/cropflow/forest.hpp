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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cropflow/dataset.hpp"
#include "cropflow/parallel.hpp"
#include "cropflow/rng.hpp"
#include "cropflow/series.hpp"

namespace cropflow {

// Internal nodes have feature >= 0 and send x[feature] <= threshold left.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t label = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  int predict(std::span<const double> x) const;
  std::size_t depth() const;
};

struct ForestConfig {
  std::size_t n_estimators = 500;
  std::size_t max_features = 8;
  std::uint64_t seed = 100;
};

using Votes = std::array<std::size_t, kNumClasses>;

struct RandomForest {
  std::size_t width = 0;  // features per sample
  std::vector<DecisionTree> trees;

  Votes votes(std::span<const double> x) const;
  // Majority vote; ties go to the lowest class index.
  int predict(std::span<const double> x) const;
  std::vector<int> predict_all(const SampleMatrix& m, Exec exec = Exec::Parallel) const;
};

int majority(const Votes& v);

// CART on the rows listed in `rows` (duplicates allowed): Gini impurity,
// unlimited depth, at least 2 samples to split. Up to `max_features`
// randomly ordered non-constant features are scored per node.
DecisionTree grow_tree(const SampleMatrix& m, std::span<const std::size_t> rows,
                       std::size_t max_features, Rng& rng);

// Tree i is grown on a bootstrap sample drawn with seed mix_seed(seed, i),
// so the forest does not depend on the thread count. Throws EmptyTrainSet.
RandomForest train_forest(const SampleMatrix& m, const ForestConfig& cfg,
                          Exec exec = Exec::Parallel);

}  // namespace cropflow
