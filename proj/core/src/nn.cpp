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

#include "slam_micro/nn.hpp"

#include <cmath>

#include "slam_micro/errors.hpp"

namespace slam_micro::nn {

void RoundToFloat(Mat& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

ad::Var Leaf(Mat value) {
  RoundToFloat(value);
  return ad::Var(std::move(value), false);
}

Mat Initializer::FanInUniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng_.Uniform(-bound, bound);
  RoundToFloat(m);
  return m;
}

Mat Initializer::Normal(Eigen::Index rows, Eigen::Index cols, double stddev) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng_.Normal();
  RoundToFloat(m);
  return m;
}

LinearLayer::LinearLayer(Eigen::Index in, Eigen::Index out, Initializer& init, bool bias) {
  w_ = Leaf(init.FanInUniform(in, out, in));
  if (bias) b_ = Leaf(init.FanInUniform(1, out, in));
}

ad::Var LinearLayer::Forward(const ad::Var& x, const RunContext& ctx) const {
  ad::Var y = ad::Linear(x, w_, b_);
  if (!lora_) return y;
  ad::Var xin = x;
  if (ctx.training && lora_->dropout > 0.0) {
    if (ctx.rng == nullptr) throw Error(ErrorKind::kContract, "LoRA dropout needs an rng");
    xin = ad::Dropout(x, lora_->dropout, *ctx.rng);
  }
  ad::Var low = ad::MatMulNT(ad::MatMulNT(xin, lora_->a), lora_->b);
  return ad::Add(y, ad::Scale(low, lora_->scaling()));
}

Mat LinearLayer::Apply(const Mat& x) const {
  Mat y = x * w_.value();
  if (b_.defined()) y.rowwise() += b_.value().row(0);
  if (lora_) {
    Mat low = (x * lora_->a.value().transpose()) * lora_->b.value().transpose();
    y += low * lora_->scaling();
  }
  return y;
}

void LinearLayer::Collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".weight", w_});
  if (b_.defined()) out.push_back({prefix + ".bias", b_});
  if (lora_) {
    out.push_back({prefix + ".lora_a", lora_->a});
    out.push_back({prefix + ".lora_b", lora_->b});
  }
}

void LinearLayer::AttachLora(int rank, double alpha, double dropout, Initializer& init) {
  if (lora_) throw Error(ErrorKind::kContract, "LoRA adapter already attached to this projection");
  if (rank < 1 || rank > std::min(in_dim(), out_dim())) {
    throw Error(ErrorKind::kContract, "LoRA rank " + std::to_string(rank) +
                                          " outside [1, " +
                                          std::to_string(std::min(in_dim(), out_dim())) + "]");
  }
  LoraAdapter ad;
  ad.rank = rank;
  ad.alpha = alpha;
  ad.dropout = dropout;
  ad.a = Leaf(init.FanInUniform(rank, in_dim(), in_dim()));
  ad.b = Leaf(Mat::Zero(out_dim(), rank));
  lora_ = std::move(ad);
}

bool LinearLayer::MergeLora() {
  if (!lora_) return false;
  Mat delta = lora_->a.value().transpose() * lora_->b.value().transpose();
  Mat merged = w_.value() + lora_->scaling() * delta;
  RoundToFloat(merged);
  const bool trainable = w_.requires_grad();
  w_ = ad::Var(std::move(merged), trainable);
  lora_.reset();
  return true;
}

LayerNormLayer::LayerNormLayer(Eigen::Index dim)
    : gamma_(Leaf(Mat::Ones(1, dim))), beta_(Leaf(Mat::Zero(1, dim))) {}

ad::Var LayerNormLayer::Forward(const ad::Var& x) const { return ad::LayerNorm(x, gamma_, beta_); }

Mat LayerNormLayer::Apply(const Mat& x) const {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    y.row(r) = ((x.row(r).array() - mu) * inv) * gamma_.value().row(0).array() +
               beta_.value().row(0).array();
  }
  return y;
}

void LayerNormLayer::Collect(const std::string& prefix, ParamList& out) const {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

FeedForward::FeedForward(Eigen::Index dim, Eigen::Index hidden, Initializer& init)
    : fc1_(dim, hidden, init), fc2_(hidden, dim, init) {}

ad::Var FeedForward::Forward(const ad::Var& x, const RunContext& ctx) const {
  return fc2_.Forward(ad::Gelu(fc1_.Forward(x, ctx)), ctx);
}

Mat FeedForward::Apply(const Mat& x) const {
  Mat h = fc1_.Apply(x);
  Mat t = (0.7978845608028654 * (h.array() + 0.044715 * h.array().cube())).tanh();
  Mat g = 0.5 * h.array() * (1.0 + t.array());
  return fc2_.Apply(g);
}

void FeedForward::Collect(const std::string& prefix, ParamList& out) const {
  fc1_.Collect(prefix + ".fc1", out);
  fc2_.Collect(prefix + ".fc2", out);
}

MultiHeadAttention::MultiHeadAttention(Eigen::Index dim, int heads, Initializer& init)
    : MultiHeadAttention(dim, dim, heads, init) {}

MultiHeadAttention::MultiHeadAttention(Eigen::Index query_dim, Eigen::Index kv_dim, int heads,
                                       Initializer& init)
    : heads_(heads),
      q_(query_dim, query_dim, init),
      k_(kv_dim, query_dim, init),
      v_(kv_dim, query_dim, init),
      o_(query_dim, query_dim, init) {
  if (heads <= 0 || query_dim % heads != 0) {
    throw Error(ErrorKind::kAssembly, "attention width " + std::to_string(query_dim) +
                                          " not divisible by heads " + std::to_string(heads));
  }
}

ad::Var MultiHeadAttention::Forward(const ad::Var& query_in, const ad::Var& kv_in, bool causal,
                                    const RunContext& ctx) const {
  ad::Var q = q_.Forward(query_in, ctx);
  ad::Var k = k_.Forward(kv_in, ctx);
  ad::Var v = v_.Forward(kv_in, ctx);
  return o_.Forward(ad::Attention(q, k, v, heads_, causal), ctx);
}

void MultiHeadAttention::Collect(const std::string& prefix, ParamList& out) const {
  q_.Collect(prefix + ".q", out);
  k_.Collect(prefix + ".k", out);
  v_.Collect(prefix + ".v", out);
  o_.Collect(prefix + ".o", out);
}

TransformerBlock::TransformerBlock(Eigen::Index dim, int heads, Initializer& init)
    : ln1_(dim), attn_(dim, heads, init), ln2_(dim), ff_(dim, 4 * dim, init) {}

ad::Var TransformerBlock::Forward(const ad::Var& x, bool causal, bool attention_enabled,
                                  const RunContext& ctx) const {
  ad::Var h = x;
  if (attention_enabled) {
    ad::Var n = ln1_.Forward(h);
    h = ad::Add(h, attn_.Forward(n, n, causal, ctx));
  }
  return ad::Add(h, ff_.Forward(ln2_.Forward(h), ctx));
}

void TransformerBlock::Collect(const std::string& prefix, ParamList& out) const {
  ln1_.Collect(prefix + ".ln1", out);
  attn_.Collect(prefix + ".attn", out);
  ln2_.Collect(prefix + ".ln2", out);
  ff_.Collect(prefix + ".ff", out);
}

Mat SinusoidalPositions(Eigen::Index length, Eigen::Index dim, Eigen::Index offset) {
  Mat pe(length, dim);
  for (Eigen::Index p = 0; p < length; ++p) {
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / dim);
      const double angle = static_cast<double>(p + offset) * freq;
      pe(p, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

std::size_t CountScalars(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += static_cast<std::size_t>(p.var.value().size());
  return n;
}

}  // namespace slam_micro::nn
