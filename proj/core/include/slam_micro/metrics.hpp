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

// WER-family metrics over whitespace tokens, mixed error rate for
// code-switched text, and corpus BLEU.

#ifndef SLAM_MICRO_METRICS_HPP_
#define SLAM_MICRO_METRICS_HPP_

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace slam_micro {

enum class EditKind { kMatch, kSubstitution, kDeletion, kInsertion };
const char* EditKindName(EditKind kind);

struct EditOp {
  EditKind kind;
  std::string ref;  // empty for insertions
  std::string hyp;  // empty for deletions
};

using AlignmentTrace = std::vector<EditOp>;

// Minimal-edit alignment of two token sequences. Among optimal alignments
// the traceback (from the end) prefers match > substitution > deletion >
// insertion.
AlignmentTrace Align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

struct WerResult {
  double rate = 0.0;
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int hits = 0;
  int ref_words = 0;
  AlignmentTrace trace;

  int errors() const { return substitutions + deletions + insertions; }
};

// Throws kUndefinedRate for an empty reference.
WerResult Wer(std::string_view ref, std::string_view hyp);
WerResult TokenErrorRate(const std::vector<std::string>& ref, const std::vector<std::string>& hyp);

struct BiasedWerResult {
  std::optional<double> b_wer;   // null when ref has no listed words
  std::optional<double> u_wer;   // null when ref has no unlisted words
  std::optional<double> recall;  // null when ref has no listed words
  int b_errors = 0;
  int u_errors = 0;
  int b_ref = 0;
  int u_ref = 0;
  int b_hits = 0;
};

BiasedWerResult BiasedWer(std::string_view ref, std::string_view hyp,
                          const std::set<std::string>& list);

// Each CJK codepoint is a token; other text splits on whitespace.
std::vector<std::string> MixedTokens(std::string_view text);
double Mer(std::string_view ref, std::string_view hyp);

struct BleuResult {
  double score = 0.0;  // [0, 100]
  std::vector<double> precisions;
  double brevity_penalty = 0.0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  std::string warning;
};

// Corpus BLEU; refs[i] holds the references of segment i. Precisions for
// n >= 2 use add-one smoothing.
BleuResult Bleu(const std::vector<std::vector<std::string>>& refs,
                const std::vector<std::string>& hyps, int max_n = 4);

// Corpus-level aggregates (sums of counts, not means of rates).
struct CorpusWer {
  double rate = 0.0;
  int errors = 0;
  int ref_words = 0;
};
CorpusWer AggregateWer(const std::vector<WerResult>& results);

struct CorpusBiasedWer {
  std::optional<double> b_wer;
  std::optional<double> u_wer;
  std::optional<double> recall;
};
CorpusBiasedWer AggregateBiasedWer(const std::vector<BiasedWerResult>& results);

}  // namespace slam_micro

#endif  // SLAM_MICRO_METRICS_HPP_
