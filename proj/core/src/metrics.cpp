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

#include "slam_micro/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "slam_micro/errors.hpp"
#include "slam_micro/recipes.hpp"

namespace slam_micro {

const char* EditKindName(EditKind kind) {
  switch (kind) {
    case EditKind::kMatch: return "match";
    case EditKind::kSubstitution: return "sub";
    case EditKind::kDeletion: return "del";
    case EditKind::kInsertion: return "ins";
  }
  return "?";
}

AlignmentTrace Align(const std::vector<std::string>& ref, const std::vector<std::string>& hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]), d[i - 1][j] + 1,
                          d[i][j - 1] + 1});
    }
  }
  AlignmentTrace trace;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && ref[i - 1] == hyp[j - 1] && d[i][j] == d[i - 1][j - 1]) {
      trace.push_back({EditKind::kMatch, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + 1) {
      trace.push_back({EditKind::kSubstitution, ref[i - 1], hyp[j - 1]});
      --i, --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      trace.push_back({EditKind::kDeletion, ref[i - 1], ""});
      --i;
    } else {
      trace.push_back({EditKind::kInsertion, "", hyp[j - 1]});
      --j;
    }
  }
  std::reverse(trace.begin(), trace.end());
  return trace;
}

WerResult TokenErrorRate(const std::vector<std::string>& ref,
                         const std::vector<std::string>& hyp) {
  if (ref.empty()) throw Error(ErrorKind::kUndefinedRate, "empty reference");
  WerResult r;
  r.trace = Align(ref, hyp);
  for (const auto& op : r.trace) {
    switch (op.kind) {
      case EditKind::kMatch: ++r.hits; break;
      case EditKind::kSubstitution: ++r.substitutions; break;
      case EditKind::kDeletion: ++r.deletions; break;
      case EditKind::kInsertion: ++r.insertions; break;
    }
  }
  r.ref_words = static_cast<int>(ref.size());
  r.rate = static_cast<double>(r.errors()) / r.ref_words;
  return r;
}

WerResult Wer(std::string_view ref, std::string_view hyp) {
  return TokenErrorRate(SplitWords(ref), SplitWords(hyp));
}

BiasedWerResult BiasedWer(std::string_view ref, std::string_view hyp,
                          const std::set<std::string>& list) {
  const auto ref_words = SplitWords(ref);
  if (ref_words.empty()) throw Error(ErrorKind::kUndefinedRate, "empty reference");
  BiasedWerResult r;
  for (const auto& op : Align(ref_words, SplitWords(hyp))) {
    if (op.kind == EditKind::kInsertion) {
      (list.contains(op.hyp) ? r.b_errors : r.u_errors) += 1;
      continue;
    }
    const bool listed = list.contains(op.ref);
    (listed ? r.b_ref : r.u_ref) += 1;
    if (op.kind == EditKind::kMatch) {
      if (listed) ++r.b_hits;
    } else {
      (listed ? r.b_errors : r.u_errors) += 1;
    }
  }
  if (r.b_ref > 0) {
    r.b_wer = static_cast<double>(r.b_errors) / r.b_ref;
    r.recall = static_cast<double>(r.b_hits) / r.b_ref;
  }
  if (r.u_ref > 0) r.u_wer = static_cast<double>(r.u_errors) / r.u_ref;
  return r;
}

namespace {

// Decodes one UTF-8 codepoint starting at s[i]; advances i. Invalid bytes
// decode as themselves.
char32_t NextCodepoint(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  int len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else if (b0 >= 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if (b0 >= 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  }
  if (len > 1 && i + static_cast<std::size_t>(len) <= s.size()) {
    for (int k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
  } else {
    len = 1;
    cp = b0;
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

bool IsCjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) ||
         (c >= 0x20000 && c <= 0x2EBEF) || (c >= 0xF900 && c <= 0xFAFF) ||
         (c >= 0x3000 && c <= 0x30FF) || (c >= 0xFF00 && c <= 0xFFEF);
}

bool IsSpace(char32_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<std::string> MixedTokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    const char32_t c = NextCodepoint(text, i);
    const std::string_view bytes = text.substr(start, i - start);
    if (IsCjk(c)) {
      if (!word.empty()) out.push_back(std::move(word));
      word.clear();
      out.emplace_back(bytes);
    } else if (IsSpace(c)) {
      if (!word.empty()) out.push_back(std::move(word));
      word.clear();
    } else {
      word += bytes;
    }
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

double Mer(std::string_view ref, std::string_view hyp) {
  return TokenErrorRate(MixedTokens(ref), MixedTokens(hyp)).rate;
}

BleuResult Bleu(const std::vector<std::vector<std::string>>& refs,
                const std::vector<std::string>& hyps, int max_n) {
  if (refs.size() != hyps.size()) {
    throw Error(ErrorKind::kShape, "BLEU needs one reference set per hypothesis");
  }
  BleuResult r;
  std::vector<std::size_t> matches(static_cast<std::size_t>(max_n), 0);
  std::vector<std::size_t> totals(static_cast<std::size_t>(max_n), 0);
  for (std::size_t s = 0; s < hyps.size(); ++s) {
    const auto h = SplitWords(hyps[s]);
    std::vector<std::vector<std::string>> rs;
    for (const auto& ref : refs[s]) rs.push_back(SplitWords(ref));
    r.hyp_length += h.size();
    // Closest reference length, shorter on ties.
    std::size_t best = 0;
    bool have = false;
    for (const auto& rw : rs) {
      const auto diff = [&](std::size_t len) {
        return len > h.size() ? len - h.size() : h.size() - len;
      };
      if (!have || diff(rw.size()) < diff(best) ||
          (diff(rw.size()) == diff(best) && rw.size() < best)) {
        best = rw.size();
        have = true;
      }
    }
    r.ref_length += best;
    for (int n = 1; n <= max_n; ++n) {
      std::map<std::vector<std::string>, int> hc, maxref;
      for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= h.size(); ++i) {
        ++hc[std::vector<std::string>(h.begin() + static_cast<std::ptrdiff_t>(i),
                                      h.begin() + static_cast<std::ptrdiff_t>(i) + n)];
      }
      for (const auto& rw : rs) {
        std::map<std::vector<std::string>, int> rc;
        for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= rw.size(); ++i) {
          ++rc[std::vector<std::string>(rw.begin() + static_cast<std::ptrdiff_t>(i),
                                        rw.begin() + static_cast<std::ptrdiff_t>(i) + n)];
        }
        for (const auto& [g, c] : rc) maxref[g] = std::max(maxref[g], c);
      }
      for (const auto& [g, c] : hc) {
        auto it = maxref.find(g);
        matches[static_cast<std::size_t>(n - 1)] +=
            static_cast<std::size_t>(std::min(c, it == maxref.end() ? 0 : it->second));
        totals[static_cast<std::size_t>(n - 1)] += static_cast<std::size_t>(c);
      }
    }
  }
  if (r.hyp_length == 0) {
    r.warning = "empty hypothesis corpus";
    return r;
  }
  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const auto m = static_cast<double>(matches[static_cast<std::size_t>(n - 1)]);
    const auto t = static_cast<double>(totals[static_cast<std::size_t>(n - 1)]);
    const double p = n == 1 ? (t > 0 ? m / t : 0.0) : (m + 1.0) / (t + 1.0);
    r.precisions.push_back(p);
    if (p <= 0.0) return r;  // score stays 0
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(r.hyp_length);
  const double ref_len = static_cast<double>(r.ref_length);
  r.brevity_penalty = c > ref_len ? 1.0 : std::exp(1.0 - ref_len / c);
  r.score = 100.0 * r.brevity_penalty * std::exp(log_sum / max_n);
  return r;
}

CorpusWer AggregateWer(const std::vector<WerResult>& results) {
  CorpusWer c;
  for (const auto& r : results) {
    c.errors += r.errors();
    c.ref_words += r.ref_words;
  }
  if (c.ref_words > 0) c.rate = static_cast<double>(c.errors) / c.ref_words;
  return c;
}

CorpusBiasedWer AggregateBiasedWer(const std::vector<BiasedWerResult>& results) {
  int be = 0, br = 0, ue = 0, ur = 0, bh = 0;
  // Utterances whose B (or U) rate is undefined are left out of that
  // aggregate entirely.
  for (const auto& r : results) {
    if (r.b_ref > 0) {
      be += r.b_errors;
      br += r.b_ref;
      bh += r.b_hits;
    }
    if (r.u_ref > 0) {
      ue += r.u_errors;
      ur += r.u_ref;
    }
  }
  CorpusBiasedWer c;
  if (br > 0) {
    c.b_wer = static_cast<double>(be) / br;
    c.recall = static_cast<double>(bh) / br;
  }
  if (ur > 0) c.u_wer = static_cast<double>(ue) / ur;
  return c;
}

}  // namespace slam_micro
