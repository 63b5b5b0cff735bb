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

// Task recipes: prompt templates and biasing-list construction/filtering.

#ifndef SLAM_MICRO_RECIPES_HPP_
#define SLAM_MICRO_RECIPES_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace slam_micro {

struct PromptFields {
  std::optional<std::string> tag;
  std::optional<std::vector<std::string>> keywords;
  std::optional<std::vector<std::string>> rag_captions;
};

// Plain-text templates keyed by task id. Placeholders: {tag}, {keywords}
// (space-joined), {rag_captions} (each rendered as "similar <caption> ").
class TemplateSet {
 public:
  // Built-in templates; identical to the files shipped in recipes/templates.
  static TemplateSet Default();
  // Reads <task>.txt for every task file present; tasks without a file keep
  // the built-in template. A single trailing newline is stripped.
  static TemplateSet FromDirectory(const std::filesystem::path& dir);

  const std::string& Get(std::string_view task) const;
  void Set(const std::string& task, std::string text) { templates_[task] = std::move(text); }

 private:
  std::map<std::string, std::string, std::less<>> templates_;
};

std::string RenderPrompt(const TemplateSet& templates, std::string_view task,
                         const PromptFields& fields);
std::string RenderPrompt(std::string_view task, const PromptFields& fields);

struct BiasingList {
  std::vector<std::string> words;
  std::size_t n_target = 0;
  std::vector<std::string> ref_words;
  std::vector<std::string> distractors;
};

// Rare words of ref_text (not among the common_top_k most frequent) plus
// seeded distractors drawn without replacement from the remaining rare
// vocabulary, shuffled with the seed.
BiasingList BuildBiasingList(std::string_view ref_text,
                             const std::map<std::string, double>& vocab_freqs, std::size_t n,
                             std::size_t common_top_k, std::uint64_t seed);

// The common_top_k most frequent words; ties broken alphabetically.
std::vector<std::string> CommonWords(const std::map<std::string, double>& vocab_freqs,
                                     std::size_t common_top_k);

// Keeps list words within normalized edit distance max_edit_ratio of some
// draft word, preserving list order.
std::vector<std::string> FilterBiasingList(std::string_view draft_transcript,
                                           const std::vector<std::string>& words,
                                           double max_edit_ratio = 0.34);

// Character-level Levenshtein distance.
std::size_t EditDistance(std::string_view a, std::string_view b);

std::vector<std::string> SplitWords(std::string_view text);
std::string JoinWords(const std::vector<std::string>& words);

// Zipf weights of the default word inventory, usable as vocab_freqs.
const std::map<std::string, double>& InventoryFrequencies();

// SRT target layout: transcript, tag, translation in one string.
std::string SrtTarget(std::string_view transcript, std::string_view tag,
                      std::string_view translation);

}  // namespace slam_micro

#endif  // SLAM_MICRO_RECIPES_HPP_
