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

#include <gtest/gtest.h>

#include <numeric>

#include "cropflow/error.hpp"
#include "cropflow/forest.hpp"
#include "datasets.hpp"

namespace cropflow {
namespace {

ForestConfig small_forest(std::size_t trees, std::uint64_t seed = 100) {
  ForestConfig c;
  c.n_estimators = trees;
  c.max_features = 2;
  c.seed = seed;
  return c;
}

TEST(Forest, SingleClassPredictsThatClass) {
  SampleMatrix m = testing::separable_matrix(10, 3, 2, 1);
  std::fill(m.y.begin(), m.y.end(), 1);
  const auto f = train_forest(m, small_forest(20));
  Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(6);
    for (double& v : x) v = rng.uniform(-10, 10);
    EXPECT_EQ(f.predict(x), 1);
  }
}

// Any stump on any feature at threshold 1 or 3 separates the clusters, so a
// forest of unlimited-depth trees must fit them exactly.
TEST(Forest, SeparableClustersFitExactly) {
  const SampleMatrix m = testing::separable_matrix(30, 4, 2, 2);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const int stump = m.row(i)[0] < 1.0 ? 0 : (m.row(i)[0] < 3.0 ? 1 : 2);
    ASSERT_EQ(stump, m.y[i]);
  }
  const auto f = train_forest(m, small_forest(500));
  const auto pred = f.predict_all(m);
  EXPECT_EQ(pred, m.y);
}

TEST(Forest, SameSeedSameForest) {
  const auto d = testing::synthetic_dataset({.counts = {20, 20, 20}});
  const auto m = to_matrix(d, d.all_indices());
  const auto a = train_forest(m, small_forest(30, 9));
  const auto b = train_forest(m, small_forest(30, 9));
  const auto c = train_forest(m, small_forest(30, 9), Exec::Serial);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
    ASSERT_EQ(a.trees[t].nodes.size(), c.trees[t].nodes.size());
    for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
      EXPECT_EQ(a.trees[t].nodes[n].feature, b.trees[t].nodes[n].feature);
      EXPECT_EQ(a.trees[t].nodes[n].threshold, b.trees[t].nodes[n].threshold);
      EXPECT_EQ(a.trees[t].nodes[n].threshold, c.trees[t].nodes[n].threshold);
    }
  }
  EXPECT_EQ(a.predict_all(m), c.predict_all(m, Exec::Serial));
}

TEST(Forest, MajorityTieGoesToLowestClass) {
  EXPECT_EQ(majority({250, 250, 0}), 0);
  EXPECT_EQ(majority({0, 3, 3}), 1);
  EXPECT_EQ(majority({1, 1, 1}), 0);
  EXPECT_EQ(majority({0, 0, 5}), 2);
}

TEST(Forest, OneTreeForestEqualsItsTree) {
  const auto d = testing::synthetic_dataset({.counts = {15, 15, 15}, .seed = 3});
  const auto m = to_matrix(d, d.all_indices());
  const auto f = train_forest(m, small_forest(1));
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(f.predict(m.row(i)), f.trees[0].predict(m.row(i)));
  }
}

TEST(Forest, VoteEqualsRecountOfTrees) {
  const auto d = testing::synthetic_dataset({.counts = {15, 15, 15}, .seed = 4});
  const auto m = to_matrix(d, d.all_indices());
  const auto f = train_forest(m, small_forest(41));
  for (std::size_t i = 0; i < m.size(); ++i) {
    Votes recount{};
    for (const auto& t : f.trees) ++recount[static_cast<std::size_t>(t.predict(m.row(i)))];
    EXPECT_EQ(f.votes(m.row(i)), recount);
    const auto best = std::max_element(recount.begin(), recount.end()) - recount.begin();
    EXPECT_EQ(f.predict(m.row(i)), best);
  }
}

TEST(Forest, TreesAreGrownToPurity) {
  const SampleMatrix m = testing::separable_matrix(8, 2, 2, 5);
  std::vector<std::size_t> rows(m.size());
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng(1);
  const auto t = grow_tree(m, rows, 1, rng);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(t.predict(m.row(i)), m.y[i]);
  EXPECT_GE(t.depth(), 1u);
}

TEST(Forest, Errors) {
  SampleMatrix empty;
  empty.steps = 2;
  empty.channels = 1;
  try {
    train_forest(empty, small_forest(3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyTrainSet);
  }
  const auto f = train_forest(testing::separable_matrix(5, 2, 1, 1), small_forest(3));
  try {
    f.predict(std::vector<double>(5, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
}

}  // namespace
}  // namespace cropflow
