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

#ifndef SLAM_MICRO_LM_CORE_HPP_
#define SLAM_MICRO_LM_CORE_HPP_

#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slam_micro/nn.hpp"

namespace slam_micro {

using TokenSeq = std::vector<int>;

// Character vocabulary: 27 text symbols, PAD/BOS/EOS, and language tags that
// encode to a single id each.
class Tokenizer {
 public:
  static constexpr int kSpace = 26;
  static constexpr int kPad = 27;
  static constexpr int kBos = 28;
  static constexpr int kEos = 29;
  static constexpr int kTagEn = 30;
  static constexpr int kTagDe = 31;
  static constexpr int kTagZh = 32;
  static constexpr int kVocabSize = 33;

  TokenSeq Encode(std::string_view text) const;
  std::string Decode(std::span<const int> ids) const;

  // Single id for "<|en|>", "<|de|>", "<|zh|>".
  int TagId(std::string_view tag) const;
  bool IsTag(int id) const { return id >= kTagEn && id <= kTagZh; }
  std::string Symbol(int id) const;
  int vocab_size() const { return kVocabSize; }

  // id -> printable symbol table, serialised alongside assets.
  std::vector<std::string> Table() const;
};

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
  double dropout = 0.0;
  std::set<std::string> targets = {"query", "value"};
};

struct ToyLmConfig {
  int vocab_size = Tokenizer::kVocabSize;
  int embed_dim = 64;
  int layers = 3;
  int heads = 4;
  bool tied_output = false;
  int bos_id = Tokenizer::kBos;
  int eos_id = Tokenizer::kEos;
};

struct LmOutput {
  ad::Var logits;    // rows = token positions (prefix rows excluded)
  ad::Var loss_sum;  // 1x1, summed cross entropy
  int scored = 0;
  double mean_loss() const { return scored ? loss_sum.scalar() / scored : 0.0; }
};

// Key/value cache for incremental decoding.
struct LmCache {
  std::vector<Mat> keys;
  std::vector<Mat> values;
  Eigen::Index target_pos = 0;
  RowVec logits;
};

// Decoder-only transformer. The input sequence is
//   [audio prefix | prompt tokens | BOS + target tokens]
// with a causal mask over the whole sequence. Each of the three segments
// carries its own learned segment embedding and restarts its sinusoidal
// positions at 0, so target step t and audio slot t share a position code.
class ToyLM {
 public:
  ToyLM() = default;
  ToyLM(const ToyLmConfig& cfg, nn::Initializer& init);

  // Training objective: mean cross entropy over the target tokens and the
  // final EOS; prefix and prompt positions are never scored. Throws on an
  // empty target.
  LmOutput Forward(const ad::Var& prefix, std::span<const int> prompt,
                   std::span<const int> target, const nn::RunContext& ctx) const;

  // Lower-level form: `tokens` is prompt + BOS + target-input (prompt_len
  // tokens belong to the prompt segment). labels/mask cover every token
  // position; only masked positions contribute.
  LmOutput ForwardSequence(const ad::Var& prefix, std::span<const int> tokens,
                           std::size_t prompt_len, std::span<const int> labels,
                           const std::vector<bool>& mask, const nn::RunContext& ctx) const;

  // Logits for every position of the full sequence (prefix rows included).
  Mat AllLogits(const Mat& prefix, std::span<const int> tokens, std::size_t prompt_len) const;

  LmCache Prefill(const Mat& prefix, std::span<const int> prompt) const;
  void Step(LmCache& cache, int token) const;

  void AttachLora(const LoraConfig& cfg, nn::Initializer& init);
  // Returns false (no-op) when no adapters are attached.
  bool MergeLora();
  bool has_lora() const;
  int adapted_projection_count() const;

  const ad::Var& embedding() const { return embed_; }

  void Collect(const std::string& prefix, nn::ParamList& out) const;
  const ToyLmConfig& config() const { return cfg_; }

 private:
  ad::Var Hidden(const ad::Var& prefix, std::span<const int> tokens, std::size_t prompt_len,
                 const nn::RunContext& ctx) const;
  ad::Var Project(const ad::Var& hidden, const nn::RunContext& ctx) const;
  Mat ProjectMat(const Mat& hidden) const;
  Mat EmbedPositions(std::span<const int> ids, int segment, Eigen::Index start) const;
  void RunCached(Mat x, LmCache& cache) const;

  ToyLmConfig cfg_;
  ad::Var embed_;    // V x E
  ad::Var segment_;  // 3 x E
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNormLayer final_ln_;
  nn::LinearLayer out_;
};

}  // namespace slam_micro

#endif  // SLAM_MICRO_LM_CORE_HPP_
