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

// Greedy and beam decoding over the toy LM, CLAP-Refine candidate
// selection, SRT output splitting and the zero-shot captioning path.

#ifndef SLAM_MICRO_DECODING_HPP_
#define SLAM_MICRO_DECODING_HPP_

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "slam_micro/aligner.hpp"
#include "slam_micro/assembly.hpp"
#include "slam_micro/lm_core.hpp"
#include "slam_micro/recipes.hpp"

namespace slam_micro {

struct Hypothesis {
  TokenSeq tokens;  // generated tokens, EOS included when emitted
  double logp = 0.0;
  int beam_width = 1;

  bool finished(int eos_id) const { return !tokens.empty() && tokens.back() == eos_id; }
};

// logp / len^length_norm, len = number of generated tokens.
double HypothesisScore(const Hypothesis& h, double length_norm);

Hypothesis Greedy(const ToyLM& lm, const Mat& prefix, std::span<const int> prompt, int max_len);

// Candidates from all live beams compete on raw logp; the best `width`
// survive, EOS-terminated ones are set aside, and live beams are closed at
// max_len. The finished set is ranked by HypothesisScore with ties broken by
// lexicographic token order. Returns at most `width` hypotheses.
std::vector<Hypothesis> BeamSearch(const ToyLM& lm, const Mat& prefix,
                                   std::span<const int> prompt, int width, int max_len,
                                   double length_norm = 1.0);

// Text of the generated tokens without the final EOS. Ids with no text form
// render as their symbol (e.g. "<bos>").
std::string HypothesisText(const Tokenizer& tok, const Hypothesis& h, int eos_id);

struct Candidate {
  std::string text;
  double logp = 0.0;
  int width = 0;
  double align_score = 0.0;
};

struct RefineResult {
  std::string text;
  std::size_t selected = 0;
  std::vector<Candidate> candidates;
};

struct RefineOptions {
  std::vector<int> widths = {2, 3, 4, 5};
  int top_m = 1;  // hypotheses pooled per width
  int max_len = 64;
  double length_norm = 1.0;
};

// Scores every candidate against the audio embedding and picks the argmax;
// ties go to the larger beam width, then to the earlier candidate.
RefineResult SelectByAlignment(std::vector<Candidate> pool, const RowVec& audio_emb,
                               const DualEncoder& aligner);

RefineResult ClapRefine(const ToyLM& lm, const Mat& prefix, std::span<const int> prompt,
                        const FeatureSeq& audio, const DualEncoder& aligner,
                        const RefineOptions& options = {});

struct SrtOutput {
  std::string transcript;
  std::string translation;
  std::string raw;
};

// Splits at the first occurrence of tag; throws kFormat carrying the raw
// string when the tag is absent.
SrtOutput ParseSrt(std::string_view raw, std::string_view tag);
SrtOutput GenerateSrt(const ToyLM& lm, const Mat& prefix, std::string_view target_tag,
                      int max_len = 128);

struct CaptionOptions {
  std::size_t k = 3;
  double tau_p = 1.0 / 30.0;
  // false: the raw audio embedding is both the prefix and the retrieval query.
  bool projection_decoding = true;
  int beam_width = 1;
  int max_len = 48;
};

struct CaptionResult {
  std::string text;
  RowVec prefix_embedding;
  std::vector<Retrieved> retrieved;
};

struct CaptionInputs {
  Mat prefix;  // one row, LM width
  TokenSeq prompt;
  RowVec embedding;  // projected (or raw) audio embedding
  std::vector<Retrieved> retrieved;
};

// Everything ZeroShotCaption feeds the decoder.
CaptionInputs PrepareCaption(const FeatureSeq& audio, const DualEncoder& aligner,
                             const Datastore& datastore, const AssembledModel& caption_model,
                             const TemplateSet& templates, const CaptionOptions& options = {});

// caption_model: identity encoder over aligner-width embeddings, trained on
// text-branch embeddings only.
CaptionResult ZeroShotCaption(const FeatureSeq& audio, const DualEncoder& aligner,
                              const Datastore& datastore, const AssembledModel& caption_model,
                              const TemplateSet& templates, const CaptionOptions& options = {});

}  // namespace slam_micro

#endif  // SLAM_MICRO_DECODING_HPP_
