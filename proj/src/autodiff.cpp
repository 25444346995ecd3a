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

#include "cropflow/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "cropflow/error.hpp"
#include "cropflow/kernels.hpp"

namespace cropflow::ad {

std::string to_string(const Shape& s) {
  return "[" + std::to_string(s.rows) + ", " + std::to_string(s.cols) + "]";
}

namespace {

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw Error(ErrorKind::ShapeMismatch,
              std::string(op) + ": " + to_string(a) + " vs " + to_string(b));
}

using Backward = std::function<void(Node&)>;

// Builds an op output; the backward rule is attached only when some input
// needs a gradient.
Tensor record(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
              Backward backward) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(value);
  bool needs = false;
  for (const auto& t : inputs) needs = needs || t.requires_grad();
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Node& in(Node& self, std::size_t i) { return *self.inputs[i]; }

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return from(shape, std::vector<double>(shape.size(), 0.0), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape.size()) {
    throw Error(ErrorKind::ShapeMismatch,
                "tensor of shape " + to_string(shape) + " given " +
                    std::to_string(values.size()) + " values");
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) { return from({1, 1}, {v}, requires_grad); }

Tensor Tensor::uniform(Shape shape, double bound, Rng& rng) {
  std::vector<double> v(shape.size());
  for (double& x : v) x = rng.uniform(-bound, bound);
  return from(shape, std::move(v), true);
}

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorKind::NotScalar, "item() of " + to_string(shape()));
  return node_->value[0];
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tape::Tape(const Tensor& root) {
  // Iterative post-order DFS; reversing it gives outputs before inputs.
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (!root.defined() || !root.requires_grad()) return;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && child->backward && seen.insert(child).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order_.push_back(node);
    stack.pop_back();
  }
  std::reverse(order_.begin(), order_.end());
}

void Tape::run() {
  // Intermediate grads restart from zero so a graph can be replayed; leaves
  // keep accumulating until zero_grad.
  for (std::size_t i = 1; i < order_.size(); ++i) {
    order_[i]->grad.assign(order_[i]->value.size(), 0.0);
  }
  for (Node* node : order_) {
    node->ensure_grad();
    for (auto& input : node->inputs) {
      if (input->requires_grad) input->ensure_grad();
    }
    node->backward(*node);
  }
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw Error(ErrorKind::NotScalar, "backward needs a scalar loss, got " +
                                          to_string(loss.shape()));
  }
  if (!loss.requires_grad()) return;
  Node& root = *loss.node();
  if (!root.backward) {
    root.ensure_grad()[0] += 1.0;
    return;
  }
  Tape tape(loss);
  root.grad.assign(1, 1.0);
  tape.run();
}

// ---- element-wise ------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  const bool broadcast = b.rows() == 1 && a.rows() != 1 && b.cols() == a.cols();
  if (!(a.shape() == b.shape()) && !broadcast) shape_error("add", a.shape(), b.shape());
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.value().begin(), a.value().end());
  const auto bv = b.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* br = bv.data() + (broadcast ? 0 : r * cols);
    double* o = out.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) o[c] += br[c];
  }
  return record(a.shape(), std::move(out), {a, b}, [broadcast, rows, cols](Node& self) {
    const auto& g = self.grad;
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    if (x.requires_grad) {
      for (std::size_t i = 0; i < g.size(); ++i) x.grad[i] += g[i];
    }
    if (y.requires_grad) {
      if (broadcast) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) y.grad[c] += g[r * cols + c];
        }
      } else {
        for (std::size_t i = 0; i < g.size(); ++i) y.grad[i] += g[i];
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) shape_error("sub", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return record(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (x.requires_grad) x.grad[i] += self.grad[i];
      if (y.requires_grad) y.grad[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) shape_error("mul", a.shape(), b.shape());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return record(a.shape(), std::move(out), {a, b}, [](Node& self) {
    Node& x = in(self, 0);
    Node& y = in(self, 1);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (x.requires_grad) x.grad[i] += self.grad[i] * y.value[i];
      if (y.requires_grad) y.grad[i] += self.grad[i] * x.value[i];
    }
  });
}

Tensor scale(const Tensor& a, double s) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * s;
  return record(a.shape(), std::move(out), {a}, [s](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += self.grad[i] * s;
  });
}

// ---- linear algebra ----------------------------------------------------------

namespace {

void add_into(std::vector<double>& dst, const std::vector<double>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

// Shared backward of matmul/affine: dA = dC B^T, dB = A^T dC.
void matmul_backward(Node& self, Node& a, Node& b) {
  const std::size_t m = a.shape.rows, k = a.shape.cols, n = b.shape.cols;
  std::vector<double> tmp;
  if (a.requires_grad) {
    tmp.resize(m * k);
    kernels::gemm_nt(m, n, k, self.grad, b.value, tmp);
    add_into(a.grad, tmp);
  }
  if (b.requires_grad) {
    tmp.resize(k * n);
    kernels::gemm_tn(m, k, n, a.value, self.grad, tmp);
    add_into(b.grad, tmp);
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) shape_error("matmul", a.shape(), b.shape());
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n);
  kernels::gemm_nn(m, k, n, a.value(), b.value(), out);
  return record({m, n}, std::move(out), {a, b},
                [](Node& self) { matmul_backward(self, in(self, 0), in(self, 1)); });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    shape_error("affine", x.shape(), w.shape());
  }
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  std::vector<double> out(m * n);
  kernels::gemm_nn(m, k, n, x.value(), w.value(), out);
  const auto bv = b.value();
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] += bv[c];
  }
  return record({m, n}, std::move(out), {x, w, b}, [m, n](Node& self) {
    matmul_backward(self, in(self, 0), in(self, 1));
    Node& bias = in(self, 2);
    if (bias.requires_grad) {
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) bias.grad[c] += self.grad[r * n + c];
      }
    }
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.value()[i * c + j];
  }
  return record({c, r}, std::move(out), {a}, [r, c](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) x.grad[i * c + j] += self.grad[j * r + i];
    }
  });
}

// ---- structural --------------------------------------------------------------

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "concat_cols of nothing");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  std::vector<std::size_t> offsets;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0].shape(), p.shape());
    offsets.push_back(cols);
    cols += p.cols();
  }
  std::vector<double> out(rows * cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const std::size_t pc = parts[k].cols();
    const auto pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * pc, pc, out.data() + r * cols + offsets[k]);
    }
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return record({rows, cols}, std::move(out), inputs, [rows, cols, offsets](Node& self) {
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      Node& x = in(self, k);
      if (!x.requires_grad) continue;
      const std::size_t pc = x.shape.cols;
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < pc; ++c) {
          x.grad[r * pc + c] += self.grad[r * cols + offsets[k] + c];
        }
      }
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
  if (start + count > a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "slice_cols past the end of " + to_string(a.shape()));
  }
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(rows * count);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().data() + r * cols + start, count, out.data() + r * count);
  }
  return record({rows, count}, std::move(out), {a}, [rows, cols, start, count](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < count; ++c) {
        x.grad[r * cols + start + c] += self.grad[r * count + c];
      }
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw Error(ErrorKind::ShapeMismatch, "concat_rows of nothing");
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) shape_error("concat_rows", parts[0].shape(), p.shape());
    rows += p.rows();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) out.insert(out.end(), p.value().begin(), p.value().end());
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return record({rows, cols}, std::move(out), inputs, [](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < self.inputs.size(); ++k) {
      Node& x = in(self, k);
      if (x.requires_grad) {
        for (std::size_t i = 0; i < x.value.size(); ++i) x.grad[i] += self.grad[offset + i];
      }
      offset += x.value.size();
    }
  });
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> index) {
  const std::size_t cols = a.cols();
  std::vector<double> out(index.size() * cols);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= a.rows()) {
      throw Error(ErrorKind::ShapeMismatch, "gather_rows index out of range");
    }
    std::copy_n(a.value().data() + index[i] * cols, cols, out.data() + i * cols);
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  return record({index.size(), cols}, std::move(out), {a}, [idx, cols](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t c = 0; c < cols; ++c) x.grad[idx[i] * cols + c] += self.grad[i * cols + c];
    }
  });
}

// ---- activations -------------------------------------------------------------

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-a.value()[i]));
  return record(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      x.grad[i] += self.grad[i] * y * (1.0 - y);
    }
  });
}

Tensor tanh(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a.value()[i]);
  return record(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      const double y = self.value[i];
      x.grad[i] += self.grad[i] * (1.0 - y * y);
    }
  });
}

Tensor relu(const Tensor& a) {
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, a.value()[i]);
  return record(a.shape(), std::move(out), {a}, [](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      if (x.value[i] > 0.0) x.grad[i] += self.grad[i];
    }
  });
}

namespace {

void softmax_rows(const double* in, double* out, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = in + r * cols;
    double* y = out + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      s += y[c];
    }
    for (std::size_t c = 0; c < cols; ++c) y[c] /= s;
  }
}

}  // namespace

Tensor softmax(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.size());
  softmax_rows(a.value().data(), out.data(), rows, cols);
  return record(a.shape(), std::move(out), {a}, [rows, cols](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[c] * y[c];
      for (std::size_t c = 0; c < cols; ++c) x.grad[r * cols + c] += y[c] * (g[c] - dot);
    }
  });
}

Tensor log_softmax(const Tensor& a) {
  const std::size_t rows = a.rows(), cols = a.cols();
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.value().data() + r * cols;
    const double mx = *std::max_element(x, x + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(x[c] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = x[c] - lse;
  }
  return record(a.shape(), std::move(out), {a}, [rows, cols](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double gs = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gs += g[c];
      for (std::size_t c = 0; c < cols; ++c) x.grad[r * cols + c] += g[c] - std::exp(y[c]) * gs;
    }
  });
}

Tensor dropout(const Tensor& a, double p, bool train, Rng& rng) {
  if (!train || p <= 0.0) return a;
  const double keep = 1.0 - p;
  std::vector<double> mask(a.size());
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < keep ? 1.0 / keep : 0.0;
    out[i] = a.value()[i] * mask[i];
  }
  return record(a.shape(), std::move(out), {a}, [mask = std::move(mask)](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += self.grad[i] * mask[i];
  });
}

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t rows = a.rows(), cols = a.cols();
  if (gamma.rows() != 1 || gamma.cols() != cols || !(beta.shape() == gamma.shape())) {
    shape_error("layer_norm", a.shape(), gamma.shape());
  }
  std::vector<double> xhat(a.size()), inv_std(rows), out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.value().data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += x[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= static_cast<double>(cols);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) {
      xhat[r * cols + c] = (x[c] - mu) * inv_std[r];
      out[r * cols + c] = xhat[r * cols + c] * gamma.value()[c] + beta.value()[c];
    }
  }
  return record(a.shape(), std::move(out), {a, gamma, beta},
                [rows, cols, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
                  Node& x = in(self, 0);
                  Node& g = in(self, 1);
                  Node& b = in(self, 2);
                  const double nc = static_cast<double>(cols);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* dy = self.grad.data() + r * cols;
                    const double* xh = xhat.data() + r * cols;
                    double s1 = 0.0, s2 = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) {
                      const double dxh = dy[c] * g.value[c];
                      s1 += dxh;
                      s2 += dxh * xh[c];
                      if (g.requires_grad) g.grad[c] += dy[c] * xh[c];
                      if (b.requires_grad) b.grad[c] += dy[c];
                    }
                    if (!x.requires_grad) continue;
                    for (std::size_t c = 0; c < cols; ++c) {
                      const double dxh = dy[c] * g.value[c];
                      x.grad[r * cols + c] += inv_std[r] * (dxh - s1 / nc - xh[c] * s2 / nc);
                    }
                  }
                });
}

// ---- reductions --------------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value()) s += v;
  return record({1, 1}, {s}, {a}, [](Node& self) {
    Node& x = in(self, 0);
    for (double& g : x.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  double s = 0.0;
  for (double v : a.value()) s += v;
  const double n = static_cast<double>(a.size());
  return record({1, 1}, {s / n}, {a}, [n](Node& self) {
    Node& x = in(self, 0);
    for (double& g : x.grad) g += self.grad[0] / n;
  });
}

Tensor mean_row_groups(const Tensor& a, std::size_t group) {
  if (group == 0 || a.rows() % group != 0) {
    throw Error(ErrorKind::ShapeMismatch, "mean_row_groups: rows not divisible by group");
  }
  const std::size_t n = a.rows() / group, cols = a.cols();
  std::vector<double> out(n * cols, 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t t = 0; t < group; ++t) {
      const double* x = a.value().data() + (b * group + t) * cols;
      for (std::size_t c = 0; c < cols; ++c) out[b * cols + c] += x[c];
    }
    for (std::size_t c = 0; c < cols; ++c) out[b * cols + c] /= static_cast<double>(group);
  }
  return record({n, cols}, std::move(out), {a}, [n, group, cols](Node& self) {
    Node& x = in(self, 0);
    const double inv = 1.0 / static_cast<double>(group);
    for (std::size_t b = 0; b < n; ++b) {
      for (std::size_t t = 0; t < group; ++t) {
        for (std::size_t c = 0; c < cols; ++c) {
          x.grad[(b * group + t) * cols + c] += self.grad[b * cols + c] * inv;
        }
      }
    }
  });
}

Tensor gradient_reversal(const Tensor& a, double lambda) {
  std::vector<double> out(a.value().begin(), a.value().end());
  return record(a.shape(), std::move(out), {a}, [lambda](Node& self) {
    Node& x = in(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) x.grad[i] += -lambda * self.grad[i];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     std::span<const double> class_weights) {
  const std::size_t batch = logits.rows(), classes = logits.cols();
  if (targets.size() != batch) {
    throw Error(ErrorKind::ShapeMismatch, "cross_entropy: " + std::to_string(targets.size()) +
                                              " targets for " + std::to_string(batch) + " rows");
  }
  if (!class_weights.empty() && class_weights.size() != classes) {
    throw Error(ErrorKind::ShapeMismatch, "cross_entropy: class weight count");
  }
  std::vector<double> prob(logits.size());
  softmax_rows(logits.value().data(), prob.data(), batch, classes);
  std::vector<double> w(batch, 1.0);
  double wsum = 0.0, loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= classes) {
      throw Error(ErrorKind::InvalidTarget, "target " + std::to_string(targets[i]));
    }
    if (!class_weights.empty()) w[i] = class_weights[static_cast<std::size_t>(targets[i])];
    const double* x = logits.value().data() + i * classes;
    const double mx = *std::max_element(x, x + classes);
    double s = 0.0;
    for (std::size_t c = 0; c < classes; ++c) s += std::exp(x[c] - mx);
    const double nll = mx + std::log(s) - x[targets[i]];
    loss += w[i] * nll;
    wsum += w[i];
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  return record({1, 1}, {loss / wsum}, {logits},
                [batch, classes, prob = std::move(prob), w = std::move(w), wsum,
                 tgt = std::move(tgt)](Node& self) {
                  Node& x = in(self, 0);
                  const double g0 = self.grad[0];
                  for (std::size_t i = 0; i < batch; ++i) {
                    const double f = g0 * w[i] / wsum;
                    for (std::size_t c = 0; c < classes; ++c) {
                      const double onehot = static_cast<int>(c) == tgt[i] ? 1.0 : 0.0;
                      x.grad[i * classes + c] += f * (prob[i * classes + c] - onehot);
                    }
                  }
                });
}

Tensor multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                            std::size_t batch, std::size_t steps, std::size_t heads,
                            std::vector<double>* weights_out) {
  const std::size_t d = q.cols();
  if (!(q.shape() == k.shape()) || !(q.shape() == v.shape()) || q.rows() != batch * steps ||
      heads == 0 || d % heads != 0) {
    shape_error("multi_head_attention", q.shape(), k.shape());
  }
  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t tt = steps * steps;
  std::vector<double> probs(batch * heads * tt);
  std::vector<double> out(q.size(), 0.0);
  const double* Q = q.value().data();
  const double* K = k.value().data();
  const double* V = v.value().data();

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* P = probs.data() + (b * heads + h) * tt;
      for (std::size_t i = 0; i < steps; ++i) {
        const double* qi = Q + (b * steps + i) * d + h * dh;
        double* pi = P + i * steps;
        for (std::size_t j = 0; j < steps; ++j) {
          const double* kj = K + (b * steps + j) * d + h * dh;
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
          pi[j] = s * inv_sqrt;
        }
      }
      softmax_rows(P, P, steps, steps);
      for (std::size_t i = 0; i < steps; ++i) {
        double* oi = out.data() + (b * steps + i) * d + h * dh;
        const double* pi = P + i * steps;
        for (std::size_t j = 0; j < steps; ++j) {
          const double* vj = V + (b * steps + j) * d + h * dh;
          for (std::size_t e = 0; e < dh; ++e) oi[e] += pi[j] * vj[e];
        }
      }
    }
  }
  if (weights_out) *weights_out = probs;

  return record(q.shape(), std::move(out), {q, k, v},
                [batch, steps, heads, d, dh, tt, inv_sqrt,
                 probs = std::move(probs)](Node& self) {
                  Node& nq = in(self, 0);
                  Node& nk = in(self, 1);
                  Node& nv = in(self, 2);
                  std::vector<double> dp(tt);
                  for (std::size_t b = 0; b < batch; ++b) {
                    for (std::size_t h = 0; h < heads; ++h) {
                      const double* P = probs.data() + (b * heads + h) * tt;
                      // dP = dO V^T and dV = P^T dO.
                      for (std::size_t i = 0; i < steps; ++i) {
                        const double* go = self.grad.data() + (b * steps + i) * d + h * dh;
                        for (std::size_t j = 0; j < steps; ++j) {
                          const double* vj = nv.value.data() + (b * steps + j) * d + h * dh;
                          double s = 0.0;
                          for (std::size_t e = 0; e < dh; ++e) s += go[e] * vj[e];
                          dp[i * steps + j] = s;
                          if (nv.requires_grad) {
                            double* gv = nv.grad.data() + (b * steps + j) * d + h * dh;
                            const double pij = P[i * steps + j];
                            for (std::size_t e = 0; e < dh; ++e) gv[e] += pij * go[e];
                          }
                        }
                      }
                      // dS = P * (dP - rowsum(dP * P)), scaled into dQ and dK.
                      for (std::size_t i = 0; i < steps; ++i) {
                        double dot = 0.0;
                        for (std::size_t j = 0; j < steps; ++j) {
                          dot += dp[i * steps + j] * P[i * steps + j];
                        }
                        const double* qi = nq.value.data() + (b * steps + i) * d + h * dh;
                        double* gq = nq.requires_grad
                                         ? nq.grad.data() + (b * steps + i) * d + h * dh
                                         : nullptr;
                        for (std::size_t j = 0; j < steps; ++j) {
                          const double ds =
                              P[i * steps + j] * (dp[i * steps + j] - dot) * inv_sqrt;
                          const double* kj = nk.value.data() + (b * steps + j) * d + h * dh;
                          if (gq) {
                            for (std::size_t e = 0; e < dh; ++e) gq[e] += ds * kj[e];
                          }
                          if (nk.requires_grad) {
                            double* gk = nk.grad.data() + (b * steps + j) * d + h * dh;
                            for (std::size_t e = 0; e < dh; ++e) gk[e] += ds * qi[e];
                          }
                        }
                      }
                    }
                  }
                });
}

// ---- optimization ------------------------------------------------------------

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size()) {
    throw Error(ErrorKind::ShapeMismatch, "adam_step: parameter/gradient length");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw Error(ErrorKind::ShapeMismatch, "adam_step: optimizer state length");
  }
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg)
    : params_(std::move(params)), states_(params_.size()), cfg_(cfg) {}

void Adam::step() {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    adam_step(params_[i].mutable_value(), params_[i].grad(), states_[i], cfg_);
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double PlateauScheduler::observe(double val_loss, double lr) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
    return lr;
  }
  if (++bad_epochs_ >= patience_) {
    bad_epochs_ = 0;
    return lr * factor_;
  }
  return lr;
}

}  // namespace cropflow::ad
