// Copyright 2026 The slam-micro Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every value is a 2-D matrix (rows are time steps / tokens);
// scalars are 1x1. Graph nodes are only recorded when at least one input
// requires a gradient, so forward passes through frozen weights with a
// constant input cost no tape memory.

#ifndef SLAM_MICRO_AUTOGRAD_HPP_
#define SLAM_MICRO_AUTOGRAD_HPP_

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace slam_micro {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

class Rng;

namespace ad {

struct Node {
  Mat value;
  Mat grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  void Accumulate(const Mat& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(Mat value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  const Mat& value() const { return node_->value; }
  Mat& mutable_value() { return node_->value; }
  const Mat& grad() const { return node_->grad; }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool defined() const { return static_cast<bool>(node_); }
  double scalar() const { return node_->value(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }

  // Seeds d(self)/d(self) = 1 and propagates through the recorded graph.
  // Only valid on 1x1 values.
  void Backward() const;

 private:
  std::shared_ptr<Node> node_;
};

Var Constant(Mat value);

// y = x W + b, with W stored (in x out) and b (1 x out). b may be undefined.
Var Linear(const Var& x, const Var& w, const Var& b);
Var MatMul(const Var& a, const Var& b);
// a * b^T
Var MatMulNT(const Var& a, const Var& b);
Var Transpose(const Var& a);
Var Add(const Var& a, const Var& b);
Var Sub(const Var& a, const Var& b);
Var Mul(const Var& a, const Var& b);
Var Scale(const Var& a, double s);
// a * s where s is a 1x1 variable
Var ScaleBy(const Var& a, const Var& s);
Var AddRow(const Var& a, const Var& row);
Var Relu(const Var& a);
Var Gelu(const Var& a);
Var Exp(const Var& a);
Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var L2NormalizeRows(const Var& a);
Var MeanRows(const Var& a);
Var SumAll(const Var& a);
Var SliceRows(const Var& a, Eigen::Index start, Eigen::Index count);
Var ConcatRows(std::span<const Var> parts);
// Row-major reinterpretation; rows * cols must be preserved.
Var Reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var GatherRows(const Var& table, std::span<const int> ids);
// Inverted dropout with a mask drawn from rng; identity when p == 0.
Var Dropout(const Var& a, double p, Rng& rng);

// Multi-head scaled dot-product attention. q is (Tq x D), k and v are
// (Tk x D), D divisible by heads. When causal is set, query row i may see
// key rows j <= i + causal_offset.
Var Attention(const Var& q, const Var& k, const Var& v, int heads, bool causal,
              Eigen::Index causal_offset = 0);

// Sum of -log softmax(logits)[row, targets[row]] over rows whose target is
// non-negative. Returns 1x1.
Var CrossEntropySum(const Var& logits, std::span<const int> targets);

// Row-wise log-softmax of a plain matrix (no graph).
Mat LogSoftmaxRows(const Mat& logits);

// Topological order of the graph ending at root (inputs before outputs).
std::vector<Node*> TopologicalOrder(const Node* root);

}  // namespace ad
}  // namespace slam_micro

#endif  // SLAM_MICRO_AUTOGRAD_HPP_
