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

// Building blocks shared by the encoders, projectors, language model and
// aligner: named parameters, linear maps with optional low-rank adapters,
// layer norm, attention and transformer blocks.

#ifndef SLAM_MICRO_NN_HPP_
#define SLAM_MICRO_NN_HPP_

#include <optional>
#include <string>
#include <vector>

#include "slam_micro/autograd.hpp"
#include "slam_micro/rng.hpp"

namespace slam_micro::nn {

// A named reference to a leaf variable. The leaf's requires_grad flag is the
// trainable bit; copies of NamedParam alias the same storage.
struct NamedParam {
  std::string name;
  ad::Var var;
};

using ParamList = std::vector<NamedParam>;

struct RunContext {
  bool training = false;
  Rng* rng = nullptr;  // required only when training with dropout
};

// Seeded weight factory. Values are rounded to float32 so that parameters
// always round-trip exactly through the float32 asset format.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
  Mat FanInUniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in);
  Mat Normal(Eigen::Index rows, Eigen::Index cols, double stddev);

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
};

ad::Var Leaf(Mat value);
void RoundToFloat(Mat& m);

struct LoraAdapter {
  ad::Var a;  // r x d_in, seeded uniform
  ad::Var b;  // d_out x r, zero at attach time
  int rank = 0;
  double alpha = 0.0;
  double dropout = 0.0;
  double scaling() const { return alpha / static_cast<double>(rank); }
};

class LinearLayer {
 public:
  LinearLayer() = default;
  LinearLayer(Eigen::Index in, Eigen::Index out, Initializer& init, bool bias = true);

  ad::Var Forward(const ad::Var& x, const RunContext& ctx) const;
  // Plain-matrix path for incremental decoding.
  Mat Apply(const Mat& x) const;

  void Collect(const std::string& prefix, ParamList& out) const;

  Eigen::Index in_dim() const { return w_.rows(); }
  Eigen::Index out_dim() const { return w_.cols(); }
  const ad::Var& weight() const { return w_; }
  const ad::Var& bias() const { return b_; }

  bool has_lora() const { return lora_.has_value(); }
  const std::optional<LoraAdapter>& lora() const { return lora_; }
  void AttachLora(int rank, double alpha, double dropout, Initializer& init);
  // Folds s * B A into W and removes the adapter. Returns false if none.
  bool MergeLora();

 private:
  ad::Var w_;  // in x out
  ad::Var b_;  // 1 x out, may be undefined
  std::optional<LoraAdapter> lora_;
};

class LayerNormLayer {
 public:
  LayerNormLayer() = default;
  explicit LayerNormLayer(Eigen::Index dim);
  ad::Var Forward(const ad::Var& x) const;
  Mat Apply(const Mat& x) const;
  void Collect(const std::string& prefix, ParamList& out) const;

 private:
  ad::Var gamma_;
  ad::Var beta_;
};

// Position-wise feed-forward H -> 4H -> H with GELU.
class FeedForward {
 public:
  FeedForward() = default;
  FeedForward(Eigen::Index dim, Eigen::Index hidden, Initializer& init);
  ad::Var Forward(const ad::Var& x, const RunContext& ctx) const;
  Mat Apply(const Mat& x) const;
  void Collect(const std::string& prefix, ParamList& out) const;

 private:
  LinearLayer fc1_;
  LinearLayer fc2_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(Eigen::Index dim, int heads, Initializer& init);
  MultiHeadAttention(Eigen::Index query_dim, Eigen::Index kv_dim, int heads, Initializer& init);

  ad::Var Forward(const ad::Var& query_in, const ad::Var& kv_in, bool causal,
                  const RunContext& ctx) const;
  void Collect(const std::string& prefix, ParamList& out) const;

  int heads() const { return heads_; }
  LinearLayer& q() { return q_; }
  LinearLayer& k() { return k_; }
  LinearLayer& v() { return v_; }
  LinearLayer& o() { return o_; }
  const LinearLayer& q() const { return q_; }
  const LinearLayer& k() const { return k_; }
  const LinearLayer& v() const { return v_; }
  const LinearLayer& o() const { return o_; }

 private:
  int heads_ = 1;
  LinearLayer q_, k_, v_, o_;
};

// Pre-norm transformer block: x + Attn(LN(x)), then x + FF(LN(x)).
class TransformerBlock {
 public:
  TransformerBlock() = default;
  TransformerBlock(Eigen::Index dim, int heads, Initializer& init);

  ad::Var Forward(const ad::Var& x, bool causal, bool attention_enabled,
                  const RunContext& ctx) const;
  void Collect(const std::string& prefix, ParamList& out) const;

  MultiHeadAttention& attn() { return attn_; }
  const MultiHeadAttention& attn() const { return attn_; }
  const LayerNormLayer& ln1() const { return ln1_; }
  const LayerNormLayer& ln2() const { return ln2_; }
  const FeedForward& ff() const { return ff_; }

 private:
  LayerNormLayer ln1_;
  MultiHeadAttention attn_;
  LayerNormLayer ln2_;
  FeedForward ff_;
};

// Fixed sinusoidal position table, rows = positions.
Mat SinusoidalPositions(Eigen::Index length, Eigen::Index dim, Eigen::Index offset = 0);

std::size_t CountScalars(const ParamList& params);

}  // namespace slam_micro::nn

#endif  // SLAM_MICRO_NN_HPP_
