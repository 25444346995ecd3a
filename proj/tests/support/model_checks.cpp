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

#include "model_checks.hpp"

#include <functional>

#include "cropflow/autodiff.hpp"
#include "cropflow/sequence_model.hpp"

namespace cropflow::oracle {

namespace {

using ad::Shape;
using ad::Tensor;

Tensor rand_leaf(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(s.size());
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(s, std::move(v), true);
}

// Contracts an arbitrary output with fixed random weights so every output
// element contributes a distinct gradient.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(y.shape().size());
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  return ad::sum(ad::mul(y, Tensor::from(y.shape(), std::move(w), false)));
}

}  // namespace

GradCheck model_gradient_check(ModelKind kind, std::uint64_t seed, std::size_t steps,
                               std::size_t channels, std::size_t per_leaf) {
  ModelConfig cfg = ModelConfig::desk(kind);
  cfg.seed = seed;
  SequenceModel model(cfg, channels, steps);
  Rng rng(mix_seed(seed, 1));
  const std::size_t batch = 2;
  std::vector<double> xv(batch * steps * channels);
  for (double& v : xv) v = rng.uniform(-1.5, 1.5);
  ad::Tensor x = ad::Tensor::from({batch * steps, channels}, xv, true);
  const std::vector<int> targets = {0, 2};
  const auto loss = [&] {
    Rng mask(mix_seed(seed, 2));
    return ad::cross_entropy(model.logits(x, batch, true, mask), targets);
  };
  std::vector<ad::Tensor> leaves = model.all_tensors();
  leaves.push_back(x);
  return gradient_check(loss, leaves, per_leaf, seed);
}

std::vector<NamedCheck> primitive_gradient_checks() {
  std::vector<NamedCheck> out;
  const auto check = [&](const std::function<Tensor()>& f, std::vector<Tensor> leaves,
                         const char* name) {
    out.push_back({name, gradient_check(f, std::move(leaves), 64, 99)});
  };
  {  // element-wise and reductions
    Rng rng(1);
    auto a = rand_leaf({3, 4}, rng), b = rand_leaf({3, 4}, rng);
    check([&] { return project(ad::add(a, b), 1); }, {a, b}, "add");
    check([&] { return project(ad::sub(a, b), 2); }, {a, b}, "sub");
    check([&] { return project(ad::mul(a, b), 3); }, {a, b}, "mul");
    check([&] { return project(ad::scale(a, -1.7), 4); }, {a}, "scale");
    check([&] { return project(ad::sigmoid(a), 5); }, {a}, "sigmoid");
    check([&] { return project(ad::tanh(a), 6); }, {a}, "tanh");
    check([&] { return project(ad::relu(a), 7); }, {a}, "relu");
    check([&] { return project(ad::softmax(a), 8); }, {a}, "softmax");
    check([&] { return project(ad::log_softmax(a), 9); }, {a}, "log_softmax");
    check([&] { return ad::mean(ad::mul(a, a)); }, {a}, "mean");
    check([&] { return project(ad::mean_row_groups(a, 3), 10); }, {a}, "mean_rows");
  }

  {  // matrix ops
    Rng rng(2);
    auto a = rand_leaf({3, 5}, rng), b = rand_leaf({5, 4}, rng), bias = rand_leaf({1, 4}, rng);
    check([&] { return project(ad::matmul(a, b), 1); }, {a, b}, "matmul");
    check([&] { return project(ad::transpose(a), 2); }, {a}, "transpose");
    check([&] { return project(ad::affine(a, b, bias), 3); }, {a, b, bias}, "affine");
    auto c = rand_leaf({3, 2}, rng);
    check(
        [&] {
          const std::vector<Tensor> parts = {a, c};
          return project(ad::concat_cols(parts), 4);
        },
        {a, c}, "concat_cols");
    auto d = rand_leaf({2, 5}, rng);
    check(
        [&] {
          const std::vector<Tensor> parts = {a, d};
          return project(ad::concat_rows(parts), 5);
        },
        {a, d}, "concat_rows");
    check([&] { return project(ad::slice_cols(a, 1, 3), 6); }, {a}, "slice_cols");
    const std::vector<std::size_t> idx = {2, 0, 2, 1};
    check([&] { return project(ad::gather_rows(a, idx), 7); }, {a}, "gather_rows");
  }

  {  // layer norm and losses
    Rng rng(3);
    auto x = rand_leaf({4, 6}, rng), g = rand_leaf({1, 6}, rng), b = rand_leaf({1, 6}, rng);
    check([&] { return project(ad::layer_norm(x, g, b), 1); }, {x, g, b}, "layer_norm");
    auto logits = rand_leaf({5, 3}, rng, -3, 3);
    const std::vector<int> t = {0, 2, 1, 1, 0};
    check([&] { return ad::cross_entropy(logits, t); }, {logits}, "cross_entropy");
    const std::vector<double> w = {0.5, 2.0, 1.25};
    check([&] { return ad::cross_entropy(logits, t, w); }, {logits}, "weighted ce");
  }

  {  // dropout, mask fixed across evaluations
    Rng rng(4);
    auto x = rand_leaf({4, 5}, rng);
    check(
        [&] {
          Rng mask_rng(17);
          return project(ad::dropout(x, 0.3, true, mask_rng), 1);
        },
        {x}, "dropout");
  }

  {  // attention
    Rng rng(5);
    const std::size_t batch = 2, steps = 4, heads = 2, d = 6;
    auto q = rand_leaf({batch * steps, d}, rng), k = rand_leaf({batch * steps, d}, rng),
         v = rand_leaf({batch * steps, d}, rng);
    check([&] { return project(ad::multi_head_attention(q, k, v, batch, steps, heads), 1); },
                     {q, k, v}, "attention");
  }
  return out;
}

}  // namespace cropflow::oracle
