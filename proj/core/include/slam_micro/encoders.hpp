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

#ifndef SLAM_MICRO_ENCODERS_HPP_
#define SLAM_MICRO_ENCODERS_HPP_

#include <string>
#include <vector>

#include "slam_micro/nn.hpp"
#include "slam_micro/synth_corpus.hpp"

namespace slam_micro {

struct FrameEncoderConfig {
  int input_dim = 40;
  int hidden = 64;
  int layers = 2;
  int heads = 4;
  bool use_positions = true;
  bool attention_enabled = true;
};

// Frame-wise encoder: input projection + sinusoidal positions, N pre-norm
// transformer blocks, final layer norm. Output length == input length.
class FrameEncoder {
 public:
  FrameEncoder() = default;
  FrameEncoder(const FrameEncoderConfig& cfg, nn::Initializer& init);

  ad::Var Forward(const ad::Var& frames, const nn::RunContext& ctx) const;
  FeatureSeq Encode(const FeatureSeq& features) const;

  void Collect(const std::string& prefix, nn::ParamList& out) const;
  const FrameEncoderConfig& config() const { return cfg_; }
  int output_dim() const { return cfg_.hidden; }

 private:
  FrameEncoderConfig cfg_;
  nn::LinearLayer input_proj_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNormLayer final_ln_;
};

struct SequenceEncoderConfig {
  FrameEncoderConfig frame;
  int output_dim = 32;
};

// Frame encoder followed by a mean over time and an H -> E_out projection:
// exactly one embedding regardless of input length.
class SequenceEncoder {
 public:
  SequenceEncoder() = default;
  SequenceEncoder(const SequenceEncoderConfig& cfg, nn::Initializer& init);

  // Returns 1 x E_out.
  ad::Var Forward(const ad::Var& frames, const nn::RunContext& ctx) const;
  Mat Encode(const FeatureSeq& features) const;

  void Collect(const std::string& prefix, nn::ParamList& out) const;
  const SequenceEncoderConfig& config() const { return cfg_; }
  int output_dim() const { return cfg_.output_dim; }

 private:
  SequenceEncoderConfig cfg_;
  FrameEncoder frames_;
  nn::LinearLayer out_proj_;
};

}  // namespace slam_micro

#endif  // SLAM_MICRO_ENCODERS_HPP_
