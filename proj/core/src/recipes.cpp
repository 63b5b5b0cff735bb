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

#include "slam_micro/recipes.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "slam_micro/errors.hpp"
#include "slam_micro/rng.hpp"
#include "slam_micro/synth_corpus.hpp"

namespace slam_micro {

TemplateSet TemplateSet::Default() {
  TemplateSet t;
  t.templates_ = {
      {"asr", "{tag}"},
      {"srt", "{tag}"},
      {"casr", "keywords {keywords} {tag}"},
      {"caption", "{rag_captions}describe"},
  };
  return t;
}

TemplateSet TemplateSet::FromDirectory(const std::filesystem::path& dir) {
  TemplateSet t = Default();
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorKind::kIo, "template directory " + dir.string() + " does not exist");
  }
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    std::ifstream in(entry.path());
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (!text.empty() && text.back() == '\n') text.pop_back();
    t.templates_[entry.path().stem().string()] = text;
  }
  return t;
}

const std::string& TemplateSet::Get(std::string_view task) const {
  auto it = templates_.find(task);
  if (it == templates_.end()) {
    throw Error(ErrorKind::kTemplate, "no template for task '" + std::string(task) + "'");
  }
  return it->second;
}

std::string RenderPrompt(const TemplateSet& templates, std::string_view task,
                         const PromptFields& fields) {
  const std::string& tpl = templates.Get(task);
  std::string out;
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] != '{') {
      out.push_back(tpl[i++]);
      continue;
    }
    const std::size_t close = tpl.find('}', i);
    if (close == std::string::npos) {
      throw Error(ErrorKind::kTemplate, "unterminated placeholder in '" + tpl + "'");
    }
    const std::string name = tpl.substr(i + 1, close - i - 1);
    if (name == "tag") {
      if (!fields.tag) throw Error(ErrorKind::kTemplate, "missing field {tag}");
      out += *fields.tag;
    } else if (name == "keywords") {
      if (!fields.keywords) throw Error(ErrorKind::kTemplate, "missing field {keywords}");
      out += JoinWords(*fields.keywords);
    } else if (name == "rag_captions") {
      if (!fields.rag_captions) throw Error(ErrorKind::kTemplate, "missing field {rag_captions}");
      for (const auto& c : *fields.rag_captions) out += "similar " + c + " ";
    } else {
      throw Error(ErrorKind::kTemplate, "unknown placeholder {" + name + "}");
    }
    i = close + 1;
  }
  return out;
}

std::string RenderPrompt(std::string_view task, const PromptFields& fields) {
  static const TemplateSet defaults = TemplateSet::Default();
  return RenderPrompt(defaults, task, fields);
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream ss{std::string(text)};
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}

std::string JoinWords(const std::vector<std::string>& words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.push_back(' ');
    out += words[i];
  }
  return out;
}

std::vector<std::string> CommonWords(const std::map<std::string, double>& vocab_freqs,
                                     std::size_t common_top_k) {
  std::vector<std::pair<std::string, double>> ranked(vocab_freqs.begin(), vocab_freqs.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < common_top_k; ++i) out.push_back(ranked[i].first);
  return out;
}

BiasingList BuildBiasingList(std::string_view ref_text,
                             const std::map<std::string, double>& vocab_freqs, std::size_t n,
                             std::size_t common_top_k, std::uint64_t seed) {
  const std::vector<std::string> common_list = CommonWords(vocab_freqs, common_top_k);
  const std::set<std::string> common(common_list.begin(), common_list.end());
  BiasingList list;
  list.n_target = n;
  std::set<std::string> refs;
  for (const auto& w : SplitWords(ref_text)) {
    if (!common.contains(w) && refs.insert(w).second) list.ref_words.push_back(w);
  }
  if (n < list.ref_words.size()) {
    throw Error(ErrorKind::kSize, "list size " + std::to_string(n) + " is smaller than the " +
                                      std::to_string(list.ref_words.size()) +
                                      " rare reference words");
  }
  std::vector<std::string> pool;
  for (const auto& [w, f] : vocab_freqs) {
    if (!common.contains(w) && !refs.contains(w)) pool.push_back(w);
  }
  const std::size_t need = n - list.ref_words.size();
  if (pool.size() < need) {
    throw Error(ErrorKind::kSize, "rare vocabulary has " + std::to_string(pool.size()) +
                                      " candidate distractors, " + std::to_string(need) +
                                      " needed");
  }
  Rng rng(seed);
  // Partial Fisher-Yates: the first `need` slots are a uniform sample.
  for (std::size_t i = 0; i < need; ++i) {
    const std::size_t j = i + rng.UniformInt(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  list.distractors.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(need));
  list.words = list.ref_words;
  list.words.insert(list.words.end(), list.distractors.begin(), list.distractors.end());
  rng.Shuffle(list.words);
  return list;
}

std::size_t EditDistance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::vector<std::string> FilterBiasingList(std::string_view draft_transcript,
                                           const std::vector<std::string>& words,
                                           double max_edit_ratio) {
  const std::vector<std::string> draft = SplitWords(draft_transcript);
  std::vector<std::string> out;
  for (const auto& w : words) {
    for (const auto& d : draft) {
      const double denom = static_cast<double>(std::max(w.size(), d.size()));
      const double ratio = denom == 0.0 ? 0.0 : static_cast<double>(EditDistance(w, d)) / denom;
      if (ratio <= max_edit_ratio) {
        out.push_back(w);
        break;
      }
    }
  }
  return out;
}

const std::map<std::string, double>& InventoryFrequencies() {
  static const std::map<std::string, double> freqs = [] {
    std::map<std::string, double> m;
    const auto& inv = DefaultInventory();
    for (std::size_t r = 0; r < inv.size(); ++r) m[inv.word(r)] = 1.0 / static_cast<double>(r + 1);
    return m;
  }();
  return freqs;
}

std::string SrtTarget(std::string_view transcript, std::string_view tag,
                      std::string_view translation) {
  return std::string(transcript) + std::string(tag) + std::string(translation);
}

}  // namespace slam_micro
