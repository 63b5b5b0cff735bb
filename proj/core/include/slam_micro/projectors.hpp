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

// Projectors map encoder frames into the language model's embedding space.
//
//   linear:  concat k consecutive frames -> Linear -> ReLU -> Linear.
//            floor(T/k) outputs; trailing T mod k frames are dropped; the
//            output frame rate is the input rate divided by k.
//   qformer: Q learned queries cross-attend to all frames through L blocks;
//            always exactly Q outputs, no frame rate.

#ifndef SLAM_MICRO_PROJECTORS_HPP_
#define SLAM_MICRO_PROJECTORS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "slam_micro/nn.hpp"
#include "slam_micro/synth_corpus.hpp"

namespace slam_micro {

struct EmbedSeq {
  Mat embeddings;  // P x E
  std::optional<double> frame_rate_hz;

  Eigen::Index length() const { return embeddings.rows(); }
};

struct LinearProjectorConfig {
  int input_dim = 64;
  int downsample_factor = 5;
  int hidden_dim = 64;
  int output_dim = 64;
};

class LinearProjector {
 public:
  LinearProjector() = default;
  LinearProjector(const LinearProjectorConfig& cfg, nn::Initializer& init);

  ad::Var Forward(const ad::Var& frames, const nn::RunContext& ctx) const;
  EmbedSeq Project(const FeatureSeq& frames) const;
  void Collect(const std::string& prefix, nn::ParamList& out) const;
  const LinearProjectorConfig& config() const { return cfg_; }

 private:
  LinearProjectorConfig cfg_;
  nn::LinearLayer fc1_;
  nn::LinearLayer fc2_;
};

struct QFormerConfig {
  int input_dim = 64;
  int output_dim = 64;
  int query_count = 16;
  int layers = 2;
  int heads = 4;
};

class QFormerProjector {
 public:
  QFormerProjector() = default;
  QFormerProjector(const QFormerConfig& cfg, nn::Initializer& init);

  ad::Var Forward(const ad::Var& frames, const nn::RunContext& ctx) const;
  EmbedSeq Project(const FeatureSeq& frames) const;
  void Collect(const std::string& prefix, nn::ParamList& out) const;
  const QFormerConfig& config() const { return cfg_; }

 private:
  struct Block {
    nn::LayerNormLayer ln_q;
    nn::LayerNormLayer ln_kv;
    nn::MultiHeadAttention cross;
    nn::LayerNormLayer ln_ff;
    nn::FeedForward ff;
  };

  QFormerConfig cfg_;
  ad::Var queries_;  // Q x E
  std::vector<Block> blocks_;
  nn::LayerNormLayer final_ln_;
};

}  // namespace slam_micro

#endif  // SLAM_MICRO_PROJECTORS_HPP_
