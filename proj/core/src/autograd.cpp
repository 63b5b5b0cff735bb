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

#include "slam_micro/autograd.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <unordered_set>

#include "slam_micro/errors.hpp"
#include "slam_micro/rng.hpp"

namespace slam_micro::ad {
namespace {

using BackwardFn = std::function<void(Node&)>;

Var Make(Mat value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool any = false;
  for (const Var& in : inputs) {
    if (in.requires_grad()) {
      any = true;
      break;
    }
  }
  if (!any) return Constant(std::move(value));
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->requires_grad = true;
  node->inputs.reserve(inputs.size());
  for (const Var& in : inputs) node->inputs.push_back(in.node());
  node->backward = std::move(backward);
  return Var(std::move(node));
}

bool Wants(const Node& self, std::size_t i) {
  return self.inputs[i] && self.inputs[i]->requires_grad;
}

void CheckSame(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::kShape,
                std::string(op) + ": operand shapes " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                    std::to_string(b.cols()) + " differ");
  }
}

void CheckInner(Eigen::Index lhs, Eigen::Index rhs, const char* op) {
  if (lhs != rhs) {
    throw Error(ErrorKind::kShape, std::string(op) + ": inner dimensions " +
                                       std::to_string(lhs) + " and " + std::to_string(rhs) +
                                       " differ");
  }
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

Var::Var(Mat value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var Constant(Mat value) { return Var(std::move(value), false); }

std::vector<Node*> TopologicalOrder(const Node* root) {
  std::vector<Node*> order;
  if (root == nullptr || !root->requires_grad) return order;
  std::unordered_set<const Node*> visited;
  // (node, next input index) frames for an explicit post-order DFS.
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(const_cast<Node*>(root), 0);
  visited.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child != nullptr && child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}

void Var::Backward() const {
  if (!node_ || !node_->requires_grad) return;
  if (node_->value.size() != 1) {
    throw Error(ErrorKind::kShape, "Backward requires a scalar (1x1) root");
  }
  std::vector<Node*> order = TopologicalOrder(node_.get());
  node_->Accumulate(Mat::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() != 0) n->backward(*n);
  }
}

Var Linear(const Var& x, const Var& w, const Var& b) {
  CheckInner(x.cols(), w.rows(), "Linear");
  Mat y = x.value() * w.value();
  if (b.defined()) y.rowwise() += b.value().row(0);
  const bool has_bias = b.defined();
  if (has_bias) {
    return Make(std::move(y), {x, w, b}, [](Node& self) {
      const Mat& g = self.grad;
      if (Wants(self, 0)) self.inputs[0]->Accumulate(g * self.inputs[1]->value.transpose());
      if (Wants(self, 1)) self.inputs[1]->Accumulate(self.inputs[0]->value.transpose() * g);
      if (Wants(self, 2)) self.inputs[2]->Accumulate(g.colwise().sum());
    });
  }
  return Make(std::move(y), {x, w}, [](Node& self) {
    const Mat& g = self.grad;
    if (Wants(self, 0)) self.inputs[0]->Accumulate(g * self.inputs[1]->value.transpose());
    if (Wants(self, 1)) self.inputs[1]->Accumulate(self.inputs[0]->value.transpose() * g);
  });
}

Var MatMul(const Var& a, const Var& b) {
  CheckInner(a.cols(), b.rows(), "MatMul");
  return Make(a.value() * b.value(), {a, b}, [](Node& self) {
    const Mat& g = self.grad;
    if (Wants(self, 0)) self.inputs[0]->Accumulate(g * self.inputs[1]->value.transpose());
    if (Wants(self, 1)) self.inputs[1]->Accumulate(self.inputs[0]->value.transpose() * g);
  });
}

Var MatMulNT(const Var& a, const Var& b) {
  CheckInner(a.cols(), b.cols(), "MatMulNT");
  return Make(a.value() * b.value().transpose(), {a, b}, [](Node& self) {
    const Mat& g = self.grad;
    if (Wants(self, 0)) self.inputs[0]->Accumulate(g * self.inputs[1]->value);
    if (Wants(self, 1)) self.inputs[1]->Accumulate(g.transpose() * self.inputs[0]->value);
  });
}

Var Transpose(const Var& a) {
  return Make(a.value().transpose(), {a}, [](Node& self) {
    self.inputs[0]->Accumulate(self.grad.transpose());
  });
}

Var Add(const Var& a, const Var& b) {
  CheckSame(a, b, "Add");
  return Make(a.value() + b.value(), {a, b}, [](Node& self) {
    if (Wants(self, 0)) self.inputs[0]->Accumulate(self.grad);
    if (Wants(self, 1)) self.inputs[1]->Accumulate(self.grad);
  });
}

Var Sub(const Var& a, const Var& b) {
  CheckSame(a, b, "Sub");
  return Make(a.value() - b.value(), {a, b}, [](Node& self) {
    if (Wants(self, 0)) self.inputs[0]->Accumulate(self.grad);
    if (Wants(self, 1)) self.inputs[1]->Accumulate(-self.grad);
  });
}

Var Mul(const Var& a, const Var& b) {
  CheckSame(a, b, "Mul");
  return Make(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    if (Wants(self, 0)) self.inputs[0]->Accumulate(self.grad.cwiseProduct(self.inputs[1]->value));
    if (Wants(self, 1)) self.inputs[1]->Accumulate(self.grad.cwiseProduct(self.inputs[0]->value));
  });
}

Var Scale(const Var& a, double s) {
  return Make(a.value() * s, {a}, [s](Node& self) { self.inputs[0]->Accumulate(self.grad * s); });
}

Var ScaleBy(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw Error(ErrorKind::kShape, "ScaleBy: scale must be 1x1");
  return Make(a.value() * s.scalar(), {a, s}, [](Node& self) {
    const double sv = self.inputs[1]->value(0, 0);
    if (Wants(self, 0)) self.inputs[0]->Accumulate(self.grad * sv);
    if (Wants(self, 1)) {
      Mat gs(1, 1);
      gs(0, 0) = self.grad.cwiseProduct(self.inputs[0]->value).sum();
      self.inputs[1]->Accumulate(gs);
    }
  });
}

Var AddRow(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw Error(ErrorKind::kShape, "AddRow: row width " + std::to_string(row.cols()) +
                                       " does not match " + std::to_string(a.cols()));
  }
  Mat y = a.value();
  y.rowwise() += row.value().row(0);
  return Make(std::move(y), {a, row}, [](Node& self) {
    if (Wants(self, 0)) self.inputs[0]->Accumulate(self.grad);
    if (Wants(self, 1)) self.inputs[1]->Accumulate(self.grad.colwise().sum());
  });
}

Var Relu(const Var& a) {
  return Make(a.value().cwiseMax(0.0), {a}, [](Node& self) {
    const Mat& x = self.inputs[0]->value;
    self.inputs[0]->Accumulate((x.array() > 0.0).select(self.grad, 0.0));
  });
}

Var Gelu(const Var& a) {
  const Mat& x = a.value();
  Mat inner = kGeluC * (x.array() + 0.044715 * x.array().cube());
  Mat t = inner.array().tanh();
  Mat y = 0.5 * x.array() * (1.0 + t.array());
  return Make(std::move(y), {a}, [t = std::move(t)](Node& self) {
    const Mat& xv = self.inputs[0]->value;
    Mat d = 0.5 * (1.0 + t.array()) +
            0.5 * xv.array() * (1.0 - t.array().square()) * kGeluC *
                (1.0 + 3.0 * 0.044715 * xv.array().square());
    self.inputs[0]->Accumulate(self.grad.cwiseProduct(d));
  });
}

Var Exp(const Var& a) {
  Mat y = a.value().array().exp();
  return Make(y, {a}, [y](Node& self) { self.inputs[0]->Accumulate(self.grad.cwiseProduct(y)); });
}

Var LayerNorm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Eigen::Index n = x.cols();
  if (gamma.cols() != n || beta.cols() != n) {
    throw Error(ErrorKind::kShape, "LayerNorm: affine width mismatch");
  }
  const Mat& xv = x.value();
  Mat xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Mat y = xhat.array().rowwise() * gamma.value().row(0).array();
  y.rowwise() += beta.value().row(0);
  return Make(std::move(y), {x, gamma, beta},
              [xhat = std::move(xhat), inv_std = std::move(inv_std), n](Node& self) {
                const Mat& g = self.grad;
                if (Wants(self, 0)) {
                  const auto& gam = self.inputs[1]->value;
                  Mat dxhat = g.array().rowwise() * gam.row(0).array();
                  Mat dx(g.rows(), n);
                  for (Eigen::Index r = 0; r < g.rows(); ++r) {
                    const double s1 = dxhat.row(r).sum();
                    const double s2 = dxhat.row(r).dot(xhat.row(r));
                    dx.row(r) = (inv_std(r) / static_cast<double>(n)) *
                                (static_cast<double>(n) * dxhat.row(r).array() - s1 -
                                 xhat.row(r).array() * s2);
                  }
                  self.inputs[0]->Accumulate(dx);
                }
                if (Wants(self, 1)) self.inputs[1]->Accumulate(g.cwiseProduct(xhat).colwise().sum());
                if (Wants(self, 2)) self.inputs[2]->Accumulate(g.colwise().sum());
              });
}

Var L2NormalizeRows(const Var& a) {
  const Mat& x = a.value();
  Eigen::VectorXd norms = x.rowwise().norm();
  for (Eigen::Index r = 0; r < norms.size(); ++r) {
    if (norms(r) < 1e-12) norms(r) = 1e-12;
  }
  Mat y = x.array().colwise() / norms.array();
  return Make(y, {a}, [y, norms](Node& self) {
    const Mat& g = self.grad;
    Mat dx(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
      const double proj = y.row(r).dot(g.row(r));
      dx.row(r) = (g.row(r) - proj * y.row(r)) / norms(r);
    }
    self.inputs[0]->Accumulate(dx);
  });
}

Var MeanRows(const Var& a) {
  const Eigen::Index t = a.rows();
  if (t == 0) throw Error(ErrorKind::kEmptyFeature, "MeanRows of an empty matrix");
  Mat y = a.value().colwise().mean();
  return Make(std::move(y), {a}, [t](Node& self) {
    Mat g = self.grad.replicate(t, 1) / static_cast<double>(t);
    self.inputs[0]->Accumulate(g);
  });
}

Var SumAll(const Var& a) {
  Mat y(1, 1);
  y(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows(), c = a.cols();
  return Make(std::move(y), {a}, [r, c](Node& self) {
    self.inputs[0]->Accumulate(Mat::Constant(r, c, self.grad(0, 0)));
  });
}

Var SliceRows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw Error(ErrorKind::kShape, "SliceRows out of range");
  }
  const Eigen::Index r = a.rows(), c = a.cols();
  return Make(a.value().middleRows(start, count), {a}, [start, count, r, c](Node& self) {
    Mat g = Mat::Zero(r, c);
    g.middleRows(start, count) = self.grad;
    self.inputs[0]->Accumulate(g);
  });
}

Var ConcatRows(std::span<const Var> parts) {
  Eigen::Index rows = 0;
  Eigen::Index cols = -1;
  bool any = false;
  for (const Var& p : parts) {
    if (cols < 0) cols = p.cols();
    if (p.cols() != cols) throw Error(ErrorKind::kShape, "ConcatRows: column counts differ");
    rows += p.rows();
    any = any || p.requires_grad();
  }
  if (cols < 0) cols = 0;
  Mat y(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    y.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  if (!any) return Constant(std::move(y));
  auto node = std::make_shared<Node>();
  node->value = std::move(y);
  node->requires_grad = true;
  std::vector<Eigen::Index> sizes;
  for (const Var& p : parts) {
    node->inputs.push_back(p.node());
    sizes.push_back(p.rows());
  }
  node->backward = [sizes = std::move(sizes)](Node& self) {
    Eigen::Index off = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      if (Wants(self, i)) self.inputs[i]->Accumulate(self.grad.middleRows(off, sizes[i]));
      off += sizes[i];
    }
  };
  return Var(std::move(node));
}

Var Reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw Error(ErrorKind::kShape, "Reshape changes size");
  Mat y = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return Make(std::move(y), {a}, [r0, c0](Node& self) {
    Mat g = Eigen::Map<const Mat>(self.grad.data(), r0, c0);
    self.inputs[0]->Accumulate(g);
  });
}

Var GatherRows(const Var& table, std::span<const int> ids) {
  const Eigen::Index vocab = table.rows();
  Mat y(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab) {
      throw Error(ErrorKind::kVocabulary, "token id " + std::to_string(ids[i]) +
                                              " outside table of " + std::to_string(vocab));
    }
    y.row(static_cast<Eigen::Index>(i)) = table.value().row(ids[i]);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return Make(std::move(y), {table}, [idv = std::move(idv)](Node& self) {
    Mat g = Mat::Zero(self.inputs[0]->value.rows(), self.inputs[0]->value.cols());
    for (std::size_t i = 0; i < idv.size(); ++i) {
      g.row(idv[i]) += self.grad.row(static_cast<Eigen::Index>(i));
    }
    self.inputs[0]->Accumulate(g);
  });
}

Var Dropout(const Var& a, double p, Rng& rng) {
  if (p <= 0.0) return a;
  const double keep = 1.0 - p;
  Mat mask(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.Uniform() < keep ? 1.0 / keep : 0.0;
  }
  Mat y = a.value().cwiseProduct(mask);
  return Make(std::move(y), {a}, [mask = std::move(mask)](Node& self) {
    self.inputs[0]->Accumulate(self.grad.cwiseProduct(mask));
  });
}

Var Attention(const Var& q, const Var& k, const Var& v, int heads, bool causal,
              Eigen::Index causal_offset) {
  const Eigen::Index d = q.cols();
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) {
    throw Error(ErrorKind::kShape, "Attention: q/k/v shapes disagree");
  }
  if (heads <= 0 || d % heads != 0) {
    throw Error(ErrorKind::kShape, "Attention: width " + std::to_string(d) +
                                       " not divisible by heads " + std::to_string(heads));
  }
  const Eigen::Index tq = q.rows(), tk = k.rows(), dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<Mat> probs(static_cast<std::size_t>(heads));
  Mat out(tq, d);
  for (int h = 0; h < heads; ++h) {
    Mat s = (q.value().middleCols(h * dh, dh) * k.value().middleCols(h * dh, dh).transpose()) *
            scale;
    if (causal) {
      for (Eigen::Index i = 0; i < tq; ++i) {
        for (Eigen::Index j = i + causal_offset + 1; j < tk; ++j) s(i, j) = neg_inf;
      }
    }
    for (Eigen::Index i = 0; i < tq; ++i) {
      const double m = s.row(i).maxCoeff();
      s.row(i) = (s.row(i).array() - m).exp();
      s.row(i) /= s.row(i).sum();
    }
    out.middleCols(h * dh, dh) = s * v.value().middleCols(h * dh, dh);
    probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  return Make(std::move(out), {q, k, v},
              [probs = std::move(probs), heads, dh, scale](Node& self) {
                const Mat& g = self.grad;
                const Mat& qv = self.inputs[0]->value;
                const Mat& kv = self.inputs[1]->value;
                const Mat& vv = self.inputs[2]->value;
                Mat dq = Mat::Zero(qv.rows(), qv.cols());
                Mat dk = Mat::Zero(kv.rows(), kv.cols());
                Mat dv = Mat::Zero(vv.rows(), vv.cols());
                for (int h = 0; h < heads; ++h) {
                  const Mat& p = probs[static_cast<std::size_t>(h)];
                  const auto gh = g.middleCols(h * dh, dh);
                  dv.middleCols(h * dh, dh) = p.transpose() * gh;
                  Mat dp = gh * vv.middleCols(h * dh, dh).transpose();
                  Eigen::VectorXd rowdot = dp.cwiseProduct(p).rowwise().sum();
                  Mat ds = p.array() * (dp.array().colwise() - rowdot.array());
                  dq.middleCols(h * dh, dh) = ds * kv.middleCols(h * dh, dh) * scale;
                  dk.middleCols(h * dh, dh) = ds.transpose() * qv.middleCols(h * dh, dh) * scale;
                }
                if (Wants(self, 0)) self.inputs[0]->Accumulate(dq);
                if (Wants(self, 1)) self.inputs[1]->Accumulate(dk);
                if (Wants(self, 2)) self.inputs[2]->Accumulate(dv);
              });
}

Mat LogSoftmaxRows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    const double lse = m + std::log((logits.row(r).array() - m).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

Var CrossEntropySum(const Var& logits, std::span<const int> targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) {
    throw Error(ErrorKind::kShape, "CrossEntropySum: target count != logit rows");
  }
  Mat logp = LogSoftmaxRows(logits.value());
  double total = 0.0;
  std::vector<int> tg(targets.begin(), targets.end());
  for (std::size_t i = 0; i < tg.size(); ++i) {
    if (tg[i] < 0) continue;
    if (tg[i] >= logits.cols()) throw Error(ErrorKind::kVocabulary, "target id out of range");
    total -= logp(static_cast<Eigen::Index>(i), tg[i]);
  }
  Mat y(1, 1);
  y(0, 0) = total;
  return Make(std::move(y), {logits}, [logp = std::move(logp), tg = std::move(tg)](Node& self) {
    const double g = self.grad(0, 0);
    Mat d = Mat::Zero(logp.rows(), logp.cols());
    for (std::size_t i = 0; i < tg.size(); ++i) {
      if (tg[i] < 0) continue;
      const auto r = static_cast<Eigen::Index>(i);
      d.row(r) = logp.row(r).array().exp() * g;
      d(r, tg[i]) -= g;
    }
    self.inputs[0]->Accumulate(d);
  });
}

}  // namespace slam_micro::ad
