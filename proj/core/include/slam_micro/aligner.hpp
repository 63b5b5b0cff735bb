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

// Contrastive audio/text dual encoder, caption datastore with exact
// retrieval, and projection of audio embeddings onto the text support.

#ifndef SLAM_MICRO_ALIGNER_HPP_
#define SLAM_MICRO_ALIGNER_HPP_

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slam_micro/encoders.hpp"
#include "slam_micro/lm_core.hpp"

namespace slam_micro {

struct AlignerConfig {
  SequenceEncoderConfig audio{FrameEncoderConfig{}, 32};
  int embed_dim = 32;  // E_a; must equal audio.output_dim
  int text_width = 64;
  int text_layers = 1;
  int text_heads = 4;
  double init_temperature = 0.07;
};

class DualEncoder {
 public:
  DualEncoder() = default;
  DualEncoder(const AlignerConfig& cfg, std::uint64_t seed);

  // 1 x E_a unit rows.
  ad::Var AudioForward(const ad::Var& features, const nn::RunContext& ctx) const;
  ad::Var TextForward(std::span<const int> tokens, const nn::RunContext& ctx) const;

  RowVec EmbedAudio(const FeatureSeq& features) const;
  // Throws kVocabulary on empty or out-of-alphabet text.
  RowVec EmbedText(std::string_view text) const;

  // exp(logit_scale); the InfoNCE temperature is its reciprocal.
  double logit_scale() const;
  const ad::Var& log_logit_scale() const { return log_scale_; }

  void Collect(const std::string& prefix, nn::ParamList& out) const;
  const AlignerConfig& config() const { return cfg_; }

 private:
  AlignerConfig cfg_;
  Tokenizer tokenizer_;
  SequenceEncoder audio_;
  ad::Var text_embed_;  // V x text_width
  std::vector<nn::TransformerBlock> text_blocks_;
  nn::LayerNormLayer text_ln_;
  nn::LinearLayer text_proj_;
  ad::Var log_scale_;  // 1 x 1
};

double Similarity(const RowVec& u, const RowVec& v);

struct AlignerTrainOptions {
  int steps = 300;
  int batch_size = 16;
  double lr = 3e-3;
  std::uint64_t seed = 0;
};

struct AlignerTrainReport {
  std::vector<double> losses;
};

// Symmetric InfoNCE over in-batch negatives.
AlignerTrainReport TrainAligner(DualEncoder& model,
                                const std::vector<std::pair<FeatureSeq, std::string>>& pairs,
                                const AlignerTrainOptions& options);

void SaveAligner(const DualEncoder& model, const std::filesystem::path& path);
DualEncoder LoadAligner(const std::filesystem::path& path);

struct Datastore {
  std::vector<std::string> captions;
  Mat embeddings;  // one unit row per caption

  std::size_t size() const { return captions.size(); }
};

struct Retrieved {
  std::size_t index;
  std::string caption;
  double score;
};

Datastore BuildDatastore(const DualEncoder& model, const std::vector<std::string>& captions);
// Top-k by descending cosine; ties keep insertion order. k > size throws.
std::vector<Retrieved> Retrieve(const Datastore& ds, const RowVec& query, std::size_t k);
// normalize(sum_i softmax(sim_i / tau_p) t_i)
RowVec ProjectToTextSpace(const RowVec& audio_emb, const Datastore& ds, double tau_p = 1.0 / 30.0);

// captions.json + embeddings.slma under dir.
void SaveDatastore(const Datastore& ds, const std::filesystem::path& dir);
Datastore LoadDatastore(const std::filesystem::path& dir);

}  // namespace slam_micro

#endif  // SLAM_MICRO_ALIGNER_HPP_
