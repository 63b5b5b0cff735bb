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

#include "slam_micro/lm_core.hpp"

#include <array>

#include "slam_micro/errors.hpp"

namespace slam_micro {
namespace {

constexpr std::array<std::string_view, 3> kTags = {"<|en|>", "<|de|>", "<|zh|>"};

}  // namespace

TokenSeq Tokenizer::Encode(std::string_view text) const {
  TokenSeq ids;
  ids.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c >= 'a' && c <= 'z') {
      ids.push_back(c - 'a');
      ++i;
    } else if (c == ' ') {
      ids.push_back(kSpace);
      ++i;
    } else if (c == '<') {
      bool matched = false;
      for (std::size_t t = 0; t < kTags.size(); ++t) {
        if (text.substr(i, kTags[t].size()) == kTags[t]) {
          ids.push_back(kTagEn + static_cast<int>(t));
          i += kTags[t].size();
          matched = true;
          break;
        }
      }
      if (!matched) {
        throw Error(ErrorKind::kVocabulary, "unknown tag at offset " + std::to_string(i) +
                                                " in \"" + std::string(text) + "\"");
      }
    } else {
      throw Error(ErrorKind::kVocabulary, "character '" + std::string(1, c) + "' at offset " +
                                              std::to_string(i) + " is not in the vocabulary");
    }
  }
  return ids;
}

std::string Tokenizer::Decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id >= 0 && id < 26) {
      out.push_back(static_cast<char>('a' + id));
    } else if (id == kSpace) {
      out.push_back(' ');
    } else if (IsTag(id)) {
      out += kTags[static_cast<std::size_t>(id - kTagEn)];
    } else {
      throw Error(ErrorKind::kVocabulary, "id " + std::to_string(id) + " has no text form");
    }
  }
  return out;
}

int Tokenizer::TagId(std::string_view tag) const {
  for (std::size_t t = 0; t < kTags.size(); ++t) {
    if (kTags[t] == tag) return kTagEn + static_cast<int>(t);
  }
  throw Error(ErrorKind::kVocabulary, "unknown language tag " + std::string(tag));
}

std::string Tokenizer::Symbol(int id) const {
  switch (id) {
    case kPad: return "<pad>";
    case kBos: return "<bos>";
    case kEos: return "<eos>";
    default: break;
  }
  const int one = id;
  return Decode(std::span<const int>(&one, 1));
}

std::vector<std::string> Tokenizer::Table() const {
  std::vector<std::string> t;
  for (int i = 0; i < kVocabSize; ++i) t.push_back(Symbol(i));
  return t;
}

ToyLM::ToyLM(const ToyLmConfig& cfg, nn::Initializer& init) : cfg_(cfg), final_ln_(cfg.embed_dim) {
  if (cfg.vocab_size < 2 || cfg.embed_dim < 1 || cfg.layers < 0) {
    throw Error(ErrorKind::kAssembly, "invalid language model dimensions");
  }
  if (cfg.bos_id < 0 || cfg.bos_id >= cfg.vocab_size || cfg.eos_id < 0 ||
      cfg.eos_id >= cfg.vocab_size) {
    throw Error(ErrorKind::kAssembly, "BOS/EOS ids outside the vocabulary");
  }
  embed_ = nn::Leaf(init.Normal(cfg.vocab_size, cfg.embed_dim, 1.0));
  segment_ = nn::Leaf(init.Normal(3, cfg.embed_dim, 1.0));
  for (int i = 0; i < cfg.layers; ++i) blocks_.emplace_back(cfg.embed_dim, cfg.heads, init);
  if (!cfg.tied_output) out_ = nn::LinearLayer(cfg.embed_dim, cfg.vocab_size, init);
}

ad::Var ToyLM::Hidden(const ad::Var& prefix, std::span<const int> tokens, std::size_t prompt_len,
                      const nn::RunContext& ctx) const {
  const Eigen::Index e = cfg_.embed_dim;
  for (int id : tokens) {
    if (id < 0 || id >= cfg_.vocab_size) {
      throw Error(ErrorKind::kVocabulary, "token id " + std::to_string(id) + " out of range");
    }
  }
  std::vector<ad::Var> parts;
  if (prefix.defined() && prefix.rows() > 0) {
    if (prefix.cols() != e) {
      throw Error(ErrorKind::kShape, "prefix width " + std::to_string(prefix.cols()) +
                                         " does not match LM embedding width " +
                                         std::to_string(e));
    }
    ad::Var p = ad::Add(prefix, ad::Constant(nn::SinusoidalPositions(prefix.rows(), e)));
    parts.push_back(ad::AddRow(p, ad::SliceRows(segment_, 0, 1)));
  }
  auto add_segment = [&](std::span<const int> ids, int seg) {
    if (ids.empty()) return;
    ad::Var x = ad::GatherRows(embed_, ids);
    x = ad::Add(x, ad::Constant(nn::SinusoidalPositions(static_cast<Eigen::Index>(ids.size()), e)));
    parts.push_back(ad::AddRow(x, ad::SliceRows(segment_, seg, 1)));
  };
  add_segment(tokens.subspan(0, prompt_len), 1);
  add_segment(tokens.subspan(prompt_len), 2);
  ad::Var h = ad::ConcatRows(parts);
  for (const auto& b : blocks_) h = b.Forward(h, true, true, ctx);
  return final_ln_.Forward(h);
}

ad::Var ToyLM::Project(const ad::Var& hidden, const nn::RunContext& ctx) const {
  if (cfg_.tied_output) return ad::MatMulNT(hidden, embed_);
  return out_.Forward(hidden, ctx);
}

Mat ToyLM::ProjectMat(const Mat& hidden) const {
  if (cfg_.tied_output) return hidden * embed_.value().transpose();
  return out_.Apply(hidden);
}

LmOutput ToyLM::ForwardSequence(const ad::Var& prefix, std::span<const int> tokens,
                                std::size_t prompt_len, std::span<const int> labels,
                                const std::vector<bool>& mask, const nn::RunContext& ctx) const {
  if (labels.size() != tokens.size() || mask.size() != tokens.size()) {
    throw Error(ErrorKind::kShape, "labels/mask must cover every token position");
  }
  if (prompt_len > tokens.size()) throw Error(ErrorKind::kShape, "prompt_len exceeds sequence");
  ad::Var h = Hidden(prefix, tokens, prompt_len, ctx);
  const Eigen::Index p = h.rows() - static_cast<Eigen::Index>(tokens.size());
  // Only the token positions can carry labels.
  ad::Var tok_h = p > 0 ? ad::SliceRows(h, p, h.rows() - p) : h;
  std::vector<int> targets(tokens.size(), -1);
  int scored = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!mask[i]) continue;
    if (labels[i] < 0 || labels[i] >= cfg_.vocab_size) {
      throw Error(ErrorKind::kVocabulary, "label " + std::to_string(labels[i]) + " out of range");
    }
    targets[i] = labels[i];
    ++scored;
  }
  LmOutput out;
  out.logits = Project(tok_h, ctx);
  out.loss_sum = ad::CrossEntropySum(out.logits, targets);
  out.scored = scored;
  return out;
}

LmOutput ToyLM::Forward(const ad::Var& prefix, std::span<const int> prompt,
                        std::span<const int> target, const nn::RunContext& ctx) const {
  if (target.empty()) {
    throw Error(ErrorKind::kContract, "empty target sequence at training time");
  }
  const std::size_t n = prompt.size() + 1 + target.size();
  std::vector<int> tokens(prompt.begin(), prompt.end());
  tokens.push_back(cfg_.bos_id);
  tokens.insert(tokens.end(), target.begin(), target.end());
  std::vector<int> labels(n, -1);
  std::vector<bool> mask(n, false);
  for (std::size_t j = 0; j <= target.size(); ++j) {
    const std::size_t pos = prompt.size() + j;
    labels[pos] = j < target.size() ? target[j] : cfg_.eos_id;
    mask[pos] = true;
  }
  return ForwardSequence(prefix, tokens, prompt.size(), labels, mask, ctx);
}

Mat ToyLM::AllLogits(const Mat& prefix, std::span<const int> tokens,
                     std::size_t prompt_len) const {
  ad::Var pre = prefix.size() > 0 ? ad::Constant(prefix) : ad::Var();
  ad::Var h = Hidden(pre, tokens, prompt_len, {});
  return ProjectMat(h.value());
}

Mat ToyLM::EmbedPositions(std::span<const int> ids, int segment, Eigen::Index start) const {
  const Eigen::Index e = cfg_.embed_dim;
  Mat x(static_cast<Eigen::Index>(ids.size()), e);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= cfg_.vocab_size) {
      throw Error(ErrorKind::kVocabulary, "token id " + std::to_string(ids[i]) + " out of range");
    }
    x.row(static_cast<Eigen::Index>(i)) = embed_.value().row(ids[i]);
  }
  x += nn::SinusoidalPositions(x.rows(), e, start);
  x.rowwise() += segment_.value().row(segment);
  return x;
}

void ToyLM::RunCached(Mat x, LmCache& cache) const {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const auto& b = blocks_[l];
    const Eigen::Index base = cache.keys[l].rows();
    Mat n = b.ln1().Apply(x);
    Mat q = b.attn().q().Apply(n);
    Mat k = b.attn().k().Apply(n);
    Mat v = b.attn().v().Apply(n);
    Mat& kc = cache.keys[l];
    Mat& vc = cache.values[l];
    kc.conservativeResize(base + k.rows(), k.cols());
    kc.bottomRows(k.rows()) = k;
    vc.conservativeResize(base + v.rows(), v.cols());
    vc.bottomRows(v.rows()) = v;
    Mat att = ad::Attention(ad::Constant(q), ad::Constant(kc), ad::Constant(vc),
                            b.attn().heads(), true, base)
                  .value();
    x += b.attn().o().Apply(att);
    x += b.ff().Apply(b.ln2().Apply(x));
  }
  Mat last = final_ln_.Apply(x.bottomRows(1));
  cache.logits = ProjectMat(last).row(0);
}

LmCache ToyLM::Prefill(const Mat& prefix, std::span<const int> prompt) const {
  const Eigen::Index e = cfg_.embed_dim;
  if (prefix.size() > 0 && prefix.cols() != e) {
    throw Error(ErrorKind::kShape, "prefix width " + std::to_string(prefix.cols()) +
                                       " does not match LM embedding width " + std::to_string(e));
  }
  LmCache cache;
  cache.keys.assign(blocks_.size(), Mat(0, e));
  cache.values.assign(blocks_.size(), Mat(0, e));
  std::vector<Mat> parts;
  if (prefix.rows() > 0) {
    Mat p = prefix + nn::SinusoidalPositions(prefix.rows(), e);
    p.rowwise() += segment_.value().row(0);
    parts.push_back(std::move(p));
  }
  if (!prompt.empty()) parts.push_back(EmbedPositions(prompt, 1, 0));
  const int bos = cfg_.bos_id;
  parts.push_back(EmbedPositions(std::span<const int>(&bos, 1), 2, 0));
  Eigen::Index rows = 0;
  for (const auto& m : parts) rows += m.rows();
  Mat x(rows, e);
  Eigen::Index r = 0;
  for (const auto& m : parts) {
    x.middleRows(r, m.rows()) = m;
    r += m.rows();
  }
  cache.target_pos = 1;
  RunCached(std::move(x), cache);
  return cache;
}

void ToyLM::Step(LmCache& cache, int token) const {
  Mat x = EmbedPositions(std::span<const int>(&token, 1), 2, cache.target_pos);
  ++cache.target_pos;
  RunCached(std::move(x), cache);
}

void ToyLM::AttachLora(const LoraConfig& cfg, nn::Initializer& init) {
  if (cfg.targets.empty()) throw Error(ErrorKind::kContract, "LoRA needs at least one target");
  for (const auto& t : cfg.targets) {
    if (t != "query" && t != "key" && t != "value" && t != "output") {
      throw Error(ErrorKind::kContract, "unknown LoRA target '" + t + "'");
    }
  }
  if (has_lora()) throw Error(ErrorKind::kContract, "LoRA adapters are already attached");
  for (auto& b : blocks_) {
    auto& a = b.attn();
    if (cfg.targets.contains("query")) a.q().AttachLora(cfg.rank, cfg.alpha, cfg.dropout, init);
    if (cfg.targets.contains("key")) a.k().AttachLora(cfg.rank, cfg.alpha, cfg.dropout, init);
    if (cfg.targets.contains("value")) a.v().AttachLora(cfg.rank, cfg.alpha, cfg.dropout, init);
    if (cfg.targets.contains("output")) a.o().AttachLora(cfg.rank, cfg.alpha, cfg.dropout, init);
  }
}

bool ToyLM::MergeLora() {
  bool merged = false;
  for (auto& b : blocks_) {
    auto& a = b.attn();
    merged |= a.q().MergeLora();
    merged |= a.k().MergeLora();
    merged |= a.v().MergeLora();
    merged |= a.o().MergeLora();
  }
  return merged;
}

bool ToyLM::has_lora() const { return adapted_projection_count() > 0; }

int ToyLM::adapted_projection_count() const {
  int n = 0;
  for (const auto& b : blocks_) {
    const auto& a = b.attn();
    n += a.q().has_lora() + a.k().has_lora() + a.v().has_lora() + a.o().has_lora();
  }
  return n;
}

void ToyLM::Collect(const std::string& prefix, nn::ParamList& out) const {
  out.push_back({prefix + ".embed", embed_});
  out.push_back({prefix + ".segment", segment_});
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].Collect(prefix + ".blocks." + std::to_string(i), out);
  }
  final_ln_.Collect(prefix + ".final_ln", out);
  if (!cfg_.tied_output) out_.Collect(prefix + ".out", out);
}

}  // namespace slam_micro
