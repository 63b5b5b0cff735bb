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

#include <algorithm>
#include <fstream>
#include <set>
#include <string>

#include "doctest.h"
#include "slam_micro/recipes.hpp"
#include "slam_micro/rng.hpp"
#include "slam_micro/synth_corpus.hpp"
#include "test_util.hpp"

using namespace slam_micro;
using slam_micro::testing::ScratchDir;
using slam_micro::testing::ThrownKind;

namespace {

std::size_t OracleEditDistance(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const std::string ra = a.substr(1), rb = b.substr(1);
  return std::min({OracleEditDistance(ra, rb) + (a[0] != b[0]), OracleEditDistance(ra, b) + 1,
                   OracleEditDistance(a, rb) + 1});
}

}  // namespace

TEST_CASE("prompt rendering") {
  PromptFields en;
  en.tag = "<|en|>";
  CHECK(RenderPrompt("asr", en) == "<|en|>");
  PromptFields de;
  de.tag = "<|de|>";
  CHECK(RenderPrompt("srt", de) == "<|de|>");

  PromptFields hot = en;
  hot.keywords = std::vector<std::string>{"cat", "dog"};
  CHECK(RenderPrompt("casr", hot).find("cat dog") != std::string::npos);
  PromptFields none = en;
  none.keywords = std::vector<std::string>{};
  const std::string no_bias = RenderPrompt("casr", none);
  CHECK(no_bias == "keywords  <|en|>");
  CHECK(RenderPrompt("casr", none) == no_bias);

  PromptFields rag;
  rag.rag_captions = std::vector<std::string>{"dog bark", "rain"};
  CHECK(RenderPrompt("caption", rag) == "similar dog bark similar rain describe");

  CHECK(ThrownKind([] { RenderPrompt("casr", PromptFields{.tag = "<|en|>"}); }) ==
        ErrorKind::kTemplate);
  CHECK(ThrownKind([] { RenderPrompt("asr", PromptFields{}); }) == ErrorKind::kTemplate);
  CHECK(ThrownKind([] { RenderPrompt("tts", PromptFields{}); }) == ErrorKind::kTemplate);
}

TEST_CASE("shipped template files match the built-in set") {
  const TemplateSet files =
      TemplateSet::FromDirectory(std::filesystem::path(SLAM_MICRO_SOURCE_DIR) / "recipes/templates");
  const TemplateSet builtin = TemplateSet::Default();
  for (const char* task : {"asr", "casr", "srt", "caption"}) {
    CHECK(files.Get(task) == builtin.Get(task));
  }
  const auto dir = ScratchDir("templates");
  std::ofstream(dir / "asr.txt") << "say {tag}\n";
  std::ofstream(dir / "srt.txt") << "{tag} {oops}";
  const TemplateSet custom = TemplateSet::FromDirectory(dir);
  CHECK(RenderPrompt(custom, "asr", PromptFields{.tag = "<|en|>"}) == "say <|en|>");
  CHECK(custom.Get("casr") == builtin.Get("casr"));
  CHECK(ThrownKind([&] { RenderPrompt(custom, "srt", PromptFields{.tag = "<|de|>"}); }) ==
        ErrorKind::kTemplate);
  CHECK(ThrownKind([&] { TemplateSet::FromDirectory(dir / "absent"); }) == ErrorKind::kIo);
}

TEST_CASE("biasing list composition over 1000 random draws") {
  const auto& freqs = InventoryFrequencies();
  const auto common = CommonWords(freqs, 50);
  const std::set<std::string> common_set(common.begin(), common.end());
  const auto& inv = DefaultInventory();
  Rng rng(1);
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::string ref = inv.SampleSentence(rng, 3, 8);
    std::set<std::string> rare;
    for (const auto& w : SplitWords(ref)) {
      if (!common_set.count(w)) rare.insert(w);
    }
    const std::size_t n = rare.size() + rng.UniformInt(100);
    const BiasingList b = BuildBiasingList(ref, freqs, n, 50, rng.NextU64());
    const std::set<std::string> words(b.words.begin(), b.words.end());
    const std::set<std::string> refs(b.ref_words.begin(), b.ref_words.end());
    bool ok = b.words.size() == n && b.n_target == n && words.size() == n && refs == rare;
    for (const auto& r : b.ref_words) ok = ok && words.count(r);
    for (const auto& d : b.distractors) ok = ok && !refs.count(d) && !common_set.count(d);
    ok = ok && b.distractors.size() == n - rare.size();
    bad += !ok;
  }
  CHECK(bad == 0);
}

TEST_CASE("biasing list examples") {
  const auto& freqs = InventoryFrequencies();
  const auto& inv = DefaultInventory();
  const std::string ref = inv.word(60) + " " + inv.word(0) + " " + inv.word(70) + " " +
                          inv.word(80) + " " + inv.word(90);
  const BiasingList b = BuildBiasingList(ref, freqs, 100, 50, 3);
  CHECK(b.ref_words.size() == 4);
  CHECK(b.distractors.size() == 96);
  CHECK(BuildBiasingList(ref, freqs, 4, 50, 3).distractors.empty());
  CHECK(BuildBiasingList(ref, freqs, 100, 50, 3).words == b.words);
  CHECK(BuildBiasingList(ref, freqs, 100, 50, 4).words != b.words);
  CHECK(ThrownKind([&] { BuildBiasingList(ref, freqs, 3, 50, 3); }) == ErrorKind::kSize);
  // 150 rare words exist; 4 are in the reference.
  CHECK(ThrownKind([&] { BuildBiasingList(ref, freqs, 200, 50, 3); }) == ErrorKind::kSize);
  CHECK_NOTHROW(BuildBiasingList(ref, freqs, 150, 50, 3));

  const auto common = CommonWords(freqs, 50);
  CHECK(common.size() == 50);
  CHECK(common == CommonWords(freqs, 50));
}

TEST_CASE("edit distance matches a recursive oracle") {
  Rng rng(2);
  for (int t = 0; t < 300; ++t) {
    std::string a(rng.UniformInt(7), 'a'), b(rng.UniformInt(7), 'a');
    for (auto& c : a) c = static_cast<char>('a' + rng.UniformInt(3));
    for (auto& c : b) c = static_cast<char>('a' + rng.UniformInt(3));
    CHECK(EditDistance(a, b) == OracleEditDistance(a, b));
  }
}

TEST_CASE("biasing list filtering") {
  const std::vector<std::string> list = {"cat", "dog", "kitten", "cart"};
  CHECK(FilterBiasingList("the cat sat", list) == std::vector<std::string>{"cat", "cart"});
  CHECK(FilterBiasingList("the cat sat", list, 0.0) == std::vector<std::string>{"cat"});
  CHECK(FilterBiasingList("", list).empty());
  CHECK(FilterBiasingList("dgo", list, 0.67) == std::vector<std::string>{"dog"});
}

TEST_CASE("srt target layout and word helpers") {
  CHECK(SrtTarget("will it rain", "<|de|>", "WILL IT RAIN") == "will it rain<|de|>WILL IT RAIN");
  CHECK(SplitWords("  a  b c ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(JoinWords({"a", "b"}) == "a b");
}
