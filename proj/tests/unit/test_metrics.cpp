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
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "slam_micro/errors.hpp"
#include "slam_micro/metrics.hpp"
#include "slam_micro/recipes.hpp"
#include "slam_micro/rng.hpp"

#include "oracles.hpp"

using namespace slam_micro;
using namespace slam_micro::oracle;

TEST_CASE("wer spec examples") {
  CHECK(Wer("a b c", "a b c").rate == 0.0);
  const WerResult w = Wer("the cat sat", "the cat");
  CHECK(w.deletions == 1);
  CHECK(w.substitutions == 0);
  CHECK(w.insertions == 0);
  CHECK(w.rate == doctest::Approx(1.0 / 3.0));
  const WerResult e = Wer("a b", "");
  CHECK(e.rate == 1.0);
  CHECK(e.deletions == 2);
  CHECK_THROWS_AS(Wer("", "a"), Error);
}

TEST_CASE("alignment trace replays ref into hyp") {
  Rng rng(3);
  const Words vocab = {"a", "b", "c", "d"};
  for (int t = 0; t < 200; ++t) {
    const Words ref = RandomWords(rng, 6, vocab);
    const Words hyp = RandomWords(rng, 6, vocab);
    Words rebuilt;
    Words consumed;
    for (const auto& op : Align(ref, hyp)) {
      if (op.kind != EditKind::kInsertion) consumed.push_back(op.ref);
      if (op.kind != EditKind::kDeletion) rebuilt.push_back(op.hyp);
    }
    CHECK(rebuilt == hyp);
    CHECK(consumed == ref);
  }
}

TEST_CASE("wer and biased wer match the brute-force oracle on 1000 random pairs") {
  Rng rng(11);
  const Words vocab = {"the", "cat", "sat", "on", "mat", "dog"};
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    Words ref = RandomWords(rng, 8, vocab);
    if (ref.empty()) ref.push_back("cat");
    const Words hyp = RandomWords(rng, 8, vocab);
    std::set<std::string> list;
    for (const auto& v : vocab) {
      if (rng.Uniform() < 0.4) list.insert(v);
    }
    const OracleResult o = BruteForce(ref, hyp, list);
    const WerResult w = Wer(JoinWords(ref), JoinWords(hyp));
    const BiasedWerResult b = BiasedWer(JoinWords(ref), JoinWords(hyp), list);
    const bool ok = w.substitutions == o.S && w.deletions == o.D && w.insertions == o.I &&
                    w.hits == o.H && b.b_errors == o.b_err && b.u_errors == o.u_err &&
                    b.b_hits == o.b_hit;
    mismatches += !ok;
    // B + U decomposition identity.
    CHECK(b.b_errors + b.u_errors == w.errors());
  }
  CHECK(mismatches == 0);
}

TEST_CASE("biased wer spec examples") {
  const BiasedWerResult a = BiasedWer("the cat sat", "the bat sat", {"cat"});
  REQUIRE(a.b_wer);
  CHECK(*a.b_wer == 1.0);
  CHECK(*a.u_wer == 0.0);
  CHECK(*a.recall == 0.0);
  const BiasedWerResult b = BiasedWer("the cat sat", "the cat sat", {"cat"});
  CHECK(*b.b_wer == 0.0);
  CHECK(*b.u_wer == 0.0);
  CHECK(*b.recall == 1.0);
  const BiasedWerResult c = BiasedWer("go cat go", "go cat cat go", {"cat"});
  CHECK(*c.b_wer == 1.0);
  CHECK(*c.u_wer == 0.0);
  CHECK(*c.recall == 1.0);
  const BiasedWerResult d = BiasedWer("go go", "go", {"cat"});
  CHECK_FALSE(d.b_wer);
  CHECK_FALSE(d.recall);
  CHECK(*d.u_wer == 0.5);
}

TEST_CASE("aggregate biased wer skips undefined utterances") {
  std::vector<BiasedWerResult> rs = {BiasedWer("go go", "x go", {"cat"}),
                                     BiasedWer("cat go", "cat go", {"cat"})};
  const CorpusBiasedWer agg = AggregateBiasedWer(rs);
  REQUIRE(agg.b_wer);
  CHECK(*agg.b_wer == 0.0);
  CHECK(*agg.recall == 1.0);
  // U counts come from both utterances: 1 error over 3 unlisted words.
  CHECK(*agg.u_wer == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("mer matches a tokenize-then-DP oracle on 1000 random pairs") {
  CHECK(Mer("我喜欢 apple", "我喜欢 apples") == doctest::Approx(0.25));
  CHECK(Mer("我喜欢 apple", "我喜欢 apple") == 0.0);
  const Words pieces = {"我", "喜", "欢", "apple", "pie", " ", "x", "猫"};
  Rng rng(5);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    std::string ref, hyp;
    const int nr = 1 + static_cast<int>(rng.UniformInt(8));
    const int nh = static_cast<int>(rng.UniformInt(9));
    for (int i = 0; i < nr; ++i) ref += pieces[rng.UniformInt(pieces.size())];
    for (int i = 0; i < nh; ++i) hyp += pieces[rng.UniformInt(pieces.size())];
    const Words rt = OracleMixedTokens(ref);
    if (rt.empty()) continue;
    CHECK(MixedTokens(ref) == rt);
    const Words ht = OracleMixedTokens(hyp);
    const OracleResult o = BruteForce(rt, ht, {});
    const double expected = static_cast<double>(o.S + o.D + o.I) / static_cast<double>(rt.size());
    mismatches += std::abs(Mer(ref, hyp) - expected) > 1e-12;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("mer reduces to wer on Latin input and to CER on CJK input") {
  CHECK(Mer("a b c", "a x c") == Wer("a b c", "a x c").rate);
  CHECK(Mer("我喜欢", "我欢") == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("bleu examples") {
  CHECK(Bleu({{"a b c d"}, {"e f g h"}}, {"a b c d", "e f g h"}).score == doctest::Approx(100.0));
  CHECK(Bleu({{"a b c d"}}, {"x y z w"}).score == 0.0);
  // Hand-computed: precisions 3/3, (2+1)/(2+1), (1+1)/(1+1), (0+1)/(0+1) and
  // brevity penalty exp(1 - 4/3).
  const BleuResult r = Bleu({{"a b c d"}}, {"a b c"});
  CHECK(r.brevity_penalty == doctest::Approx(std::exp(1.0 - 4.0 / 3.0)));
  CHECK(r.score == doctest::Approx(100.0 * std::exp(1.0 - 4.0 / 3.0)));
  const BleuResult empty = Bleu({{"a b"}}, {""});
  CHECK(empty.score == 0.0);
  CHECK_FALSE(empty.warning.empty());
}

TEST_CASE("corpus metrics are invariant to segment order") {
  const std::vector<std::string> refs = {"a b c", "d e", "f g h i"};
  const std::vector<std::string> hyps = {"a c", "d e x", "f g h j"};
  std::vector<WerResult> fwd, rev;
  for (int i = 0; i < 3; ++i) fwd.push_back(Wer(refs[i], hyps[i]));
  for (int i = 2; i >= 0; --i) rev.push_back(Wer(refs[i], hyps[i]));
  CHECK(AggregateWer(fwd).rate == AggregateWer(rev).rate);
  const double b1 = Bleu({{refs[0]}, {refs[1]}, {refs[2]}}, hyps).score;
  const double b2 = Bleu({{refs[2]}, {refs[1]}, {refs[0]}}, {hyps[2], hyps[1], hyps[0]}).score;
  CHECK(b1 == doctest::Approx(b2).epsilon(1e-12));
}
