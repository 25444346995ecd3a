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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cropflow/rng.hpp"

// Reverse-mode differentiation over dense row-major matrices. Every tensor is
// two-dimensional [rows, cols]; a scalar is [1, 1]. Sequences of B samples
// and T steps are laid out as [B*T, C] with row b*T + t.
namespace cropflow::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first use
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  // Adds this node's gradient contribution into its inputs' grads.
  std::function<void(Node&)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  // Uniform(-bound, bound) leaf with requires_grad set.
  static Tensor uniform(Shape shape, double bound, Rng& rng);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rows() const { return node_->shape.rows; }
  std::size_t cols() const { return node_->shape.cols; }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> value() const { return node_->value; }
  std::span<double> mutable_value() { return node_->value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

  // Zeros when nothing has been accumulated yet.
  std::span<const double> grad() const { return node_->ensure_grad(); }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Reverse topological record of a backward pass, leaves excluded.
class Tape {
 public:
  // Records every node reachable from `root` that needs a gradient.
  explicit Tape(const Tensor& root);
  std::size_t size() const { return order_.size(); }
  // Runs each backward rule once, output first.
  void run();

 private:
  std::vector<Node*> order_;
};

// Seeds d(loss)/d(loss) = 1 and accumulates grads into every requires_grad
// tensor on the graph. Throws NotScalar unless loss is [1, 1].
void backward(const Tensor& loss);

// ---- primitives ------------------------------------------------------------
// All throw ShapeMismatch on incompatible operands.

// b may equal a's shape or be a [1, cols] row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x[m,k] * w[k,n] + b[1,n]
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
// Row i of the result is row index[i] of a; repeated indices accumulate.
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index);

Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
// Row-wise softmax / log-softmax over the last axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);

// Inverted dropout: in training, zeroes entries with probability p and
// scales survivors by 1/(1-p); in evaluation returns `a` itself.
Tensor dropout(const Tensor& a, double p, bool train, Rng& rng);

// Row-wise normalization with learned gain [1,c] and bias [1,c].
Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Mean over consecutive blocks of `group` rows: [n*group, c] -> [n, c].
Tensor mean_row_groups(const Tensor& a, std::size_t group);

// Identity forward; backward multiplies the upstream gradient by -lambda.
Tensor gradient_reversal(const Tensor& a, double lambda);

// Weighted mean over the batch of -log softmax(logits)[target]; with class
// weights w the mean is sum(w_t * nll) / sum(w_t). Throws InvalidTarget.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     std::span<const double> class_weights = {});

// Scaled dot-product attention, split into `heads` heads, applied
// independently to each of `batch` sequences of `steps` rows. q, k, v are
// [batch*steps, d]. When `weights_out` is given it receives the attention
// probabilities laid out [batch][head][query][key].
Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t batch, std::size_t steps, std::size_t heads,
                            std::vector<double>* weights_out = nullptr);

// ---- optimization ------------------------------------------------------------

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::size_t t = 0;
};

// One bias-corrected Adam update in place. Throws ShapeMismatch.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig cfg);

  void step();
  void zero_grad();
  double lr() const { return cfg_.lr; }
  void set_lr(double lr) { cfg_.lr = lr; }
  const std::vector<Tensor>& params() const { return params_; }

 private:
  std::vector<Tensor> params_;
  std::vector<AdamState> states_;
  AdamConfig cfg_;
};

// Halves (by `factor`) the learning rate once validation loss has failed to
// improve for `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor = 0.5, std::size_t patience = 3)
      : factor_(factor), patience_(patience) {}

  // Returns the learning rate to use for the next epoch.
  double observe(double val_loss, double lr);

 private:
  double factor_;
  std::size_t patience_;
  double best_ = 1e300;
  std::size_t bad_epochs_ = 0;
};

}  // namespace cropflow::ad
