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

#include "slam_micro/projectors.hpp"

#include "slam_micro/errors.hpp"

namespace slam_micro {

LinearProjector::LinearProjector(const LinearProjectorConfig& cfg, nn::Initializer& init)
    : cfg_(cfg),
      fc1_(static_cast<Eigen::Index>(cfg.downsample_factor) * cfg.input_dim, cfg.hidden_dim, init),
      fc2_(cfg.hidden_dim, cfg.output_dim, init) {
  if (cfg.downsample_factor < 1) {
    throw Error(ErrorKind::kAssembly, "downsample_factor must be >= 1");
  }
}

ad::Var LinearProjector::Forward(const ad::Var& frames, const nn::RunContext& ctx) const {
  const Eigen::Index t = frames.rows();
  const Eigen::Index k = cfg_.downsample_factor;
  if (frames.cols() != cfg_.input_dim) {
    throw Error(ErrorKind::kShape, "projector expects width " + std::to_string(cfg_.input_dim) +
                                       ", got " + std::to_string(frames.cols()));
  }
  if (t < k) {
    throw Error(ErrorKind::kTooShort, "input of T=" + std::to_string(t) +
                                          " frames is shorter than downsample factor k=" +
                                          std::to_string(k));
  }
  const Eigen::Index out_len = t / k;
  ad::Var kept = out_len * k == t ? frames : ad::SliceRows(frames, 0, out_len * k);
  // Row-major reshape concatenates frames [i*k, i*k + k) into row i.
  ad::Var stacked = ad::Reshape(kept, out_len, k * cfg_.input_dim);
  return fc2_.Forward(ad::Relu(fc1_.Forward(stacked, ctx)), ctx);
}

EmbedSeq LinearProjector::Project(const FeatureSeq& frames) const {
  EmbedSeq out;
  out.embeddings = Forward(ad::Constant(frames.frames), {}).value();
  out.frame_rate_hz = frames.frame_rate_hz / cfg_.downsample_factor;
  return out;
}

void LinearProjector::Collect(const std::string& prefix, nn::ParamList& out) const {
  fc1_.Collect(prefix + ".fc1", out);
  fc2_.Collect(prefix + ".fc2", out);
}

QFormerProjector::QFormerProjector(const QFormerConfig& cfg, nn::Initializer& init)
    : cfg_(cfg), final_ln_(cfg.output_dim) {
  if (cfg.query_count < 1) throw Error(ErrorKind::kAssembly, "query_count must be >= 1");
  queries_ = nn::Leaf(init.Normal(cfg.query_count, cfg.output_dim, 1.0));
  for (int i = 0; i < cfg.layers; ++i) {
    Block b{nn::LayerNormLayer(cfg.output_dim), nn::LayerNormLayer(cfg.input_dim),
            nn::MultiHeadAttention(cfg.output_dim, cfg.input_dim, cfg.heads, init),
            nn::LayerNormLayer(cfg.output_dim),
            nn::FeedForward(cfg.output_dim, 4 * cfg.output_dim, init)};
    blocks_.push_back(std::move(b));
  }
}

ad::Var QFormerProjector::Forward(const ad::Var& frames, const nn::RunContext& ctx) const {
  if (frames.rows() < 1) throw Error(ErrorKind::kTooShort, "Q-Former needs at least one frame");
  if (frames.cols() != cfg_.input_dim) {
    throw Error(ErrorKind::kShape, "projector expects width " + std::to_string(cfg_.input_dim) +
                                       ", got " + std::to_string(frames.cols()));
  }
  ad::Var h = queries_;
  for (const auto& b : blocks_) {
    ad::Var kv = b.ln_kv.Forward(frames);
    h = ad::Add(h, b.cross.Forward(b.ln_q.Forward(h), kv, false, ctx));
    h = ad::Add(h, b.ff.Forward(b.ln_ff.Forward(h), ctx));
  }
  return final_ln_.Forward(h);
}

EmbedSeq QFormerProjector::Project(const FeatureSeq& frames) const {
  EmbedSeq out;
  out.embeddings = Forward(ad::Constant(frames.frames), {}).value();
  return out;
}

void QFormerProjector::Collect(const std::string& prefix, nn::ParamList& out) const {
  out.push_back({prefix + ".queries", queries_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string p = prefix + ".blocks." + std::to_string(i);
    blocks_[i].ln_q.Collect(p + ".ln_q", out);
    blocks_[i].ln_kv.Collect(p + ".ln_kv", out);
    blocks_[i].cross.Collect(p + ".cross", out);
    blocks_[i].ln_ff.Collect(p + ".ln_ff", out);
    blocks_[i].ff.Collect(p + ".ff", out);
  }
  final_ln_.Collect(prefix + ".final_ln", out);
}

}  // namespace slam_micro
