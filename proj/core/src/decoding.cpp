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

#include "slam_micro/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slam_micro/errors.hpp"

namespace slam_micro {
namespace {

RowVec LogSoftmax(const RowVec& logits) {
  const double m = logits.maxCoeff();
  const double lse = m + std::log((logits.array() - m).exp().sum());
  return logits.array() - lse;
}

struct Beam {
  Hypothesis hyp;
  LmCache cache;
};

// Higher score first; equal scores fall back to token order.
bool RanksBefore(double sa, const TokenSeq& a, double sb, const TokenSeq& b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

}  // namespace

double HypothesisScore(const Hypothesis& h, double length_norm) {
  const double len = static_cast<double>(std::max<std::size_t>(1, h.tokens.size()));
  return h.logp / std::pow(len, length_norm);
}

Hypothesis Greedy(const ToyLM& lm, const Mat& prefix, std::span<const int> prompt, int max_len) {
  if (max_len < 1) throw Error(ErrorKind::kContract, "max_len must be >= 1");
  LmCache cache = lm.Prefill(prefix, prompt);
  Hypothesis h;
  for (int step = 0; step < max_len; ++step) {
    const RowVec lp = LogSoftmax(cache.logits);
    Eigen::Index best = 0;
    // maxCoeff keeps the first maximum, i.e. the smallest id.
    lp.maxCoeff(&best);
    h.tokens.push_back(static_cast<int>(best));
    h.logp += lp(best);
    if (best == lm.config().eos_id || step + 1 == max_len) break;
    lm.Step(cache, static_cast<int>(best));
  }
  return h;
}

std::vector<Hypothesis> BeamSearch(const ToyLM& lm, const Mat& prefix,
                                   std::span<const int> prompt, int width, int max_len,
                                   double length_norm) {
  if (width < 1) throw Error(ErrorKind::kContract, "beam width must be >= 1");
  if (max_len < 1) throw Error(ErrorKind::kContract, "max_len must be >= 1");
  const int eos = lm.config().eos_id;
  std::vector<Beam> live;
  live.push_back({Hypothesis{{}, 0.0, width}, lm.Prefill(prefix, prompt)});
  std::vector<Hypothesis> finished;
  for (int step = 1; step <= max_len && !live.empty(); ++step) {
    struct Cand {
      std::size_t beam;
      int token;
      double logp;
      TokenSeq tokens;
    };
    std::vector<Cand> cands;
    for (std::size_t b = 0; b < live.size(); ++b) {
      const RowVec lp = LogSoftmax(live[b].cache.logits);
      for (int v = 0; v < lp.size(); ++v) {
        TokenSeq t = live[b].hyp.tokens;
        t.push_back(v);
        cands.push_back({b, v, live[b].hyp.logp + lp(v), std::move(t)});
      }
    }
    const std::size_t keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(width));
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                      [](const Cand& a, const Cand& b) {
                        return RanksBefore(a.logp, a.tokens, b.logp, b.tokens);
                      });
    std::vector<Beam> next;
    for (std::size_t i = 0; i < keep; ++i) {
      Cand& c = cands[i];
      Hypothesis h{std::move(c.tokens), c.logp, width};
      if (c.token == eos || step == max_len) {
        finished.push_back(std::move(h));
        continue;
      }
      LmCache cache = live[c.beam].cache;
      lm.Step(cache, c.token);
      next.push_back({std::move(h), std::move(cache)});
    }
    live = std::move(next);
  }
  std::sort(finished.begin(), finished.end(), [&](const Hypothesis& a, const Hypothesis& b) {
    return RanksBefore(HypothesisScore(a, length_norm), a.tokens, HypothesisScore(b, length_norm),
                       b.tokens);
  });
  if (finished.size() > static_cast<std::size_t>(width)) finished.resize(width);
  return finished;
}

std::string HypothesisText(const Tokenizer& tok, const Hypothesis& h, int eos_id) {
  std::span<const int> ids(h.tokens);
  if (!ids.empty() && ids.back() == eos_id) ids = ids.first(ids.size() - 1);
  std::string out;
  for (int id : ids) out += tok.Symbol(id);
  return out;
}

RefineResult SelectByAlignment(std::vector<Candidate> pool, const RowVec& audio_emb,
                               const DualEncoder& aligner) {
  if (pool.empty()) throw Error(ErrorKind::kContract, "empty candidate pool");
  RefineResult r;
  for (auto& c : pool) {
    try {
      c.align_score = Similarity(audio_emb, aligner.EmbedText(c.text));
    } catch (const Error& e) {
      // Empty or non-text output cannot be embedded; it never wins.
      if (e.kind() != ErrorKind::kVocabulary) throw;
      c.align_score = -std::numeric_limits<double>::infinity();
    }
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const auto& a = pool[i];
    const auto& b = pool[best];
    if (a.align_score > b.align_score || (a.align_score == b.align_score && a.width > b.width)) {
      best = i;
    }
  }
  r.selected = best;
  r.text = pool[best].text;
  r.candidates = std::move(pool);
  return r;
}

RefineResult ClapRefine(const ToyLM& lm, const Mat& prefix, std::span<const int> prompt,
                        const FeatureSeq& audio, const DualEncoder& aligner,
                        const RefineOptions& options) {
  if (options.widths.empty()) throw Error(ErrorKind::kContract, "CLAP-Refine needs beam widths");
  Tokenizer tok;
  std::vector<Candidate> pool;
  for (int w : options.widths) {
    const auto beams = BeamSearch(lm, prefix, prompt, w, options.max_len, options.length_norm);
    const std::size_t m = std::min<std::size_t>(beams.size(), static_cast<std::size_t>(options.top_m));
    for (std::size_t i = 0; i < m; ++i) {
      Candidate c{HypothesisText(tok, beams[i], lm.config().eos_id), beams[i].logp, w, 0.0};
      auto dup = std::find_if(pool.begin(), pool.end(),
                              [&](const Candidate& p) { return p.text == c.text; });
      if (dup == pool.end()) {
        pool.push_back(std::move(c));
      } else if (w > dup->width) {
        dup->width = w;
        dup->logp = c.logp;
      }
    }
  }
  return SelectByAlignment(std::move(pool), aligner.EmbedAudio(audio), aligner);
}

SrtOutput ParseSrt(std::string_view raw, std::string_view tag) {
  const auto at = raw.find(tag);
  if (tag.empty() || at == std::string_view::npos) {
    throw Error(ErrorKind::kFormat, "no " + std::string(tag) + " in output: " + std::string(raw));
  }
  return {std::string(raw.substr(0, at)), std::string(raw.substr(at + tag.size())),
          std::string(raw)};
}

SrtOutput GenerateSrt(const ToyLM& lm, const Mat& prefix, std::string_view target_tag,
                      int max_len) {
  Tokenizer tok;
  const int tag = tok.TagId(target_tag);
  const Hypothesis h = Greedy(lm, prefix, std::span<const int>(&tag, 1), max_len);
  return ParseSrt(HypothesisText(tok, h, lm.config().eos_id), target_tag);
}

CaptionInputs PrepareCaption(const FeatureSeq& audio, const DualEncoder& aligner,
                             const Datastore& datastore, const AssembledModel& caption_model,
                             const TemplateSet& templates, const CaptionOptions& options) {
  if (datastore.size() == 0) throw Error(ErrorKind::kContract, "empty caption datastore");
  const RowVec e = aligner.EmbedAudio(audio);
  CaptionInputs in;
  in.embedding = options.projection_decoding ? ProjectToTextSpace(e, datastore, options.tau_p) : e;
  in.retrieved = Retrieve(datastore, in.embedding, options.k);
  std::vector<std::string> rag;
  for (const auto& x : in.retrieved) rag.push_back(x.caption);
  PromptFields fields;
  fields.rag_captions = rag;
  in.prompt = caption_model.tokenizer().Encode(RenderPrompt(templates, "caption", fields));
  in.prefix = caption_model.AudioPrefix(FeatureSeq{in.embedding, 0.0}).embeddings;
  return in;
}

CaptionResult ZeroShotCaption(const FeatureSeq& audio, const DualEncoder& aligner,
                              const Datastore& datastore, const AssembledModel& caption_model,
                              const TemplateSet& templates, const CaptionOptions& options) {
  CaptionInputs in = PrepareCaption(audio, aligner, datastore, caption_model, templates, options);
  const ToyLM& lm = caption_model.lm();
  const auto beams = BeamSearch(lm, in.prefix, in.prompt, options.beam_width, options.max_len);
  CaptionResult r;
  r.text = HypothesisText(caption_model.tokenizer(), beams.front(), lm.config().eos_id);
  r.prefix_embedding = std::move(in.embedding);
  r.retrieved = std::move(in.retrieved);
  return r;
}

}  // namespace slam_micro
