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

#include "slam_micro/encoders.hpp"

#include "slam_micro/errors.hpp"

namespace slam_micro {

FrameEncoder::FrameEncoder(const FrameEncoderConfig& cfg, nn::Initializer& init)
    : cfg_(cfg), input_proj_(cfg.input_dim, cfg.hidden, init), final_ln_(cfg.hidden) {
  if (cfg.input_dim < 1 || cfg.hidden < 1 || cfg.layers < 0) {
    throw Error(ErrorKind::kAssembly, "frame encoder dimensions must be positive");
  }
  for (int i = 0; i < cfg.layers; ++i) blocks_.emplace_back(cfg.hidden, cfg.heads, init);
}

ad::Var FrameEncoder::Forward(const ad::Var& frames, const nn::RunContext& ctx) const {
  if (frames.cols() != cfg_.input_dim) {
    throw Error(ErrorKind::kShape, "encoder expects width " + std::to_string(cfg_.input_dim) +
                                       ", got " + std::to_string(frames.cols()));
  }
  ad::Var h = input_proj_.Forward(frames, ctx);
  if (cfg_.use_positions) {
    h = ad::Add(h, ad::Constant(nn::SinusoidalPositions(frames.rows(), cfg_.hidden)));
  }
  for (const auto& block : blocks_) h = block.Forward(h, false, cfg_.attention_enabled, ctx);
  return final_ln_.Forward(h);
}

FeatureSeq FrameEncoder::Encode(const FeatureSeq& features) const {
  FeatureSeq out;
  out.frames = Forward(ad::Constant(features.frames), {}).value();
  out.frame_rate_hz = features.frame_rate_hz;
  return out;
}

void FrameEncoder::Collect(const std::string& prefix, nn::ParamList& out) const {
  input_proj_.Collect(prefix + ".input_proj", out);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].Collect(prefix + ".blocks." + std::to_string(i), out);
  }
  final_ln_.Collect(prefix + ".final_ln", out);
}

SequenceEncoder::SequenceEncoder(const SequenceEncoderConfig& cfg, nn::Initializer& init)
    : cfg_(cfg), frames_(cfg.frame, init), out_proj_(cfg.frame.hidden, cfg.output_dim, init) {}

ad::Var SequenceEncoder::Forward(const ad::Var& frames, const nn::RunContext& ctx) const {
  if (frames.rows() == 0) throw Error(ErrorKind::kEmptyFeature, "sequence encoder got no frames");
  return out_proj_.Forward(ad::MeanRows(frames_.Forward(frames, ctx)), ctx);
}

Mat SequenceEncoder::Encode(const FeatureSeq& features) const {
  return Forward(ad::Constant(features.frames), {}).value();
}

void SequenceEncoder::Collect(const std::string& prefix, nn::ParamList& out) const {
  frames_.Collect(prefix, out);
  out_proj_.Collect(prefix + ".out_proj", out);
}

}  // namespace slam_micro
