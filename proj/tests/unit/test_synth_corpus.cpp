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

#include <cmath>
#include <complex>
#include <fstream>
#include <set>
#include <sstream>
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

// Matched-filter oracle: correlate each 100 ms window with a complex
// exponential at every alphabet frequency and keep the strongest.
std::string MatchedFilterDecode(const Waveform& w) {
  const int win = kSampleRate / 10;
  std::string out;
  for (std::size_t start = 0; start + win <= w.samples.size(); start += win) {
    int best = 0;
    double best_energy = -1.0;
    for (int c = 0; c < kAlphabetSize; ++c) {
      const double f = 400.0 + 25.0 * c;
      std::complex<double> acc = 0.0;
      for (int n = 0; n < win; ++n) {
        const double phase = 2.0 * M_PI * f * n / kSampleRate;
        acc += w.samples[start + n] * std::complex<double>(std::cos(phase), -std::sin(phase));
      }
      if (std::norm(acc) > best_energy) best_energy = std::norm(acc), best = c;
    }
    out.push_back(AlphabetChar(best));
  }
  return out;
}

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("tone construction") {
  ToneSpec clean;
  clean.snr_db = std::nullopt;
  const Waveform w = SynthUtterance("ab", clean, 1);
  REQUIRE(w.samples.size() == 3200);
  CHECK(w.sample_rate_hz == 16000);
  for (int n = 0; n < 3200; ++n) {
    const double f = n < 1600 ? 400.0 : 425.0;
    const int local = n % 1600;
    CHECK(w.samples[n] == doctest::Approx(0.5 * std::sin(2 * M_PI * f * local / 16000.0)));
  }
  CHECK(SynthUtterance("", clean, 1).samples.empty());
  CHECK(ThrownKind([] { SynthUtterance("aB", ToneSpec{}, 1); }) == ErrorKind::kVocabulary);
  CHECK(ThrownKind([] { SynthUtterance("a1", ToneSpec{}, 1); }) == ErrorKind::kVocabulary);
}

TEST_CASE("synthesis is deterministic and bounded") {
  ToneSpec noisy;
  noisy.snr_db = 0.0;
  const Waveform a = SynthUtterance("hello world", noisy, 9);
  const Waveform b = SynthUtterance("hello world", noisy, 9);
  const Waveform c = SynthUtterance("hello world", noisy, 10);
  CHECK(a.samples == b.samples);
  CHECK(a.samples != c.samples);
  for (double s : a.samples) CHECK(std::abs(s) <= 1.0);
  CHECK(a.duration_s() == doctest::Approx(1.1));
}

TEST_CASE("matched filter recovers 1000 random strings at 20 dB") {
  Rng rng(2024);
  ToneSpec spec;
  spec.snr_db = 20.0;
  int errors = 0;
  for (int t = 0; t < 1000; ++t) {
    std::string text(5 + rng.UniformInt(16), ' ');
    for (auto& ch : text) ch = AlphabetChar(static_cast<int>(rng.UniformInt(kAlphabetSize)));
    errors += MatchedFilterDecode(SynthUtterance(text, spec, rng.NextU64())) != text;
  }
  CHECK(errors == 0);
}

TEST_CASE("log-mel frame arithmetic") {
  Waveform one{std::vector<double>(16000, 0.0)};
  const FeatureSeq f1 = LogMel(one);
  CHECK(f1.length() == 50);
  CHECK(f1.width() == 40);
  CHECK(f1.frame_rate_hz == 50.0);
  // Silence: every frame is the same epsilon-dominated vector.
  for (Eigen::Index t = 0; t < f1.length(); ++t) {
    for (Eigen::Index j = 0; j < f1.width(); ++j) {
      CHECK(f1.frames(t, j) == doctest::Approx(std::log(1e-6)));
    }
  }
  Waveform ten{std::vector<double>(160000, 0.0)};
  CHECK(LogMel(ten).length() == 500);
  Waveform short_wave{std::vector<double>(639, 0.0)};
  CHECK(ThrownKind([&] { LogMel(short_wave); }) == ErrorKind::kEmptyFeature);

  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    std::string text(1 + rng.UniformInt(40), 'a');
    const Waveform w = SynthUtterance(text, ToneSpec{}, t);
    const double expected = 50.0 * w.duration_s();
    CHECK(std::abs(LogMel(w).length() - expected) <= 1.0);
  }
}

TEST_CASE("mel filterbank separates every tone") {
  // Distinct tones give distinct dominant-filter energy profiles.
  ToneSpec clean;
  clean.snr_db = std::nullopt;
  std::vector<Eigen::VectorXd> profiles;
  for (int c = 0; c < kAlphabetSize; ++c) {
    const FeatureSeq f = LogMel(SynthUtterance(std::string(1, AlphabetChar(c)), clean, 0));
    profiles.push_back(f.frames.row(2).transpose());
  }
  for (int a = 0; a < kAlphabetSize; ++a) {
    for (int b = a + 1; b < kAlphabetSize; ++b) {
      CHECK((profiles[a] - profiles[b]).cwiseAbs().maxCoeff() > 0.1);
    }
  }
  const Mat fb = MelFilterbank(MelConfig{}, kSampleRate);
  CHECK(fb.rows() == 40);
  CHECK(fb.cols() == 321);
  CHECK(fb.minCoeff() >= 0.0);
}

TEST_CASE("wav round trip equals 16-bit quantisation") {
  const auto dir = ScratchDir("wav");
  const Waveform w = SynthUtterance("round trip", ToneSpec{}, 3);
  WriteWav(dir / "x.wav", w);
  const Waveform r = ReadWav(dir / "x.wav");
  CHECK(r.samples == QuantizePcm16(w).samples);
  CHECK(r.sample_rate_hz == 16000);
  std::ofstream(dir / "bad.wav") << "not a wav";
  CHECK(ThrownKind([&] { ReadWav(dir / "bad.wav"); }) == ErrorKind::kFormat);
  CHECK(ThrownKind([&] { ReadWav(dir / "missing.wav"); }) == ErrorKind::kIo);
}

TEST_CASE("corpora are byte-identical across runs") {
  const auto a = ScratchDir("corpus_a");
  const auto b = ScratchDir("corpus_b");
  CorpusSpec spec;
  spec.seed = 1;
  spec.n_utts = 4;
  MakeCorpus(spec, a);
  MakeCorpus(spec, b);
  CHECK(ReadFile(a / "manifest.jsonl") == ReadFile(b / "manifest.jsonl"));
  for (const auto& rec : ReadManifest(a / "manifest.jsonl").records) {
    const auto name = std::filesystem::path(rec.audio).filename();
    CHECK(ReadFile(a / name) == ReadFile(b / name));
    CHECK(std::filesystem::exists(rec.audio));
  }
  spec.n_utts = 0;
  CHECK(ThrownKind([&] { MakeCorpus(spec, a); }) == ErrorKind::kContract);
}

TEST_CASE("casr keywords are rare words of their own text") {
  const auto dir = ScratchDir("casr");
  CorpusSpec spec;
  spec.task = CorpusTask::kCasr;
  spec.n_utts = 16;
  const DatasetManifest m = MakeCorpus(spec, dir);
  const auto rare = DefaultInventory().DesignatedRare(spec.common_top_k);
  const std::set<std::string> rare_set(rare.begin(), rare.end());
  for (const auto& rec : m.records) {
    REQUIRE(rec.keywords);
    CHECK_FALSE(rec.keywords->empty());
    const auto words = SplitWords(rec.text);
    const std::set<std::string> word_set(words.begin(), words.end());
    for (const auto& k : *rec.keywords) {
      CHECK(word_set.count(k) == 1);
      CHECK(rare_set.count(k) == 1);
    }
  }
}

TEST_CASE("srt translations follow the lexicon word by word") {
  const auto dir = ScratchDir("srt");
  CorpusSpec spec;
  spec.task = CorpusTask::kSrt;
  spec.n_utts = 8;
  const auto& inv = DefaultInventory();
  for (const auto& rec : MakeCorpus(spec, dir).records) {
    REQUIRE(rec.translation);
    std::vector<std::string> expected;
    for (const auto& w : SplitWords(rec.text)) expected.push_back(inv.Translate(w));
    CHECK(*rec.translation == JoinWords(expected));
    CHECK(rec.lang_tag == std::optional<std::string>("<|de|>"));
  }
  const std::string a = inv.word(0), b = inv.word(1);
  CHECK(inv.TranslateSentence(a + " " + b) == inv.Translate(a) + " " + inv.Translate(b));
}

TEST_CASE("word inventory follows a Zipf-like draw") {
  const auto& inv = DefaultInventory();
  CHECK(inv.size() == 200);
  Rng rng(1);
  std::vector<int> counts(inv.size(), 0);
  for (int i = 0; i < 20000; ++i) ++counts[inv.SampleRank(rng)];
  CHECK(counts[0] > counts[10]);
  CHECK(counts[10] > counts[150]);
  const auto rare = inv.DesignatedRare(50);
  CHECK(rare.size() == 150);
  CHECK(rare.front() == inv.word(50));
}

TEST_CASE("manifest jsonl round trip") {
  DatasetManifest m;
  m.records.push_back({"a.wav", "hi there", std::vector<std::string>{"there"}, "x y", "<|de|>"});
  m.records.push_back({"b.wav", "plain", std::nullopt, std::nullopt, std::nullopt});
  const DatasetManifest r = ManifestFromJsonl(ManifestToJsonl(m));
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].keywords == m.records[0].keywords);
  CHECK(r.records[0].translation == m.records[0].translation);
  CHECK(r.records[0].lang_tag == m.records[0].lang_tag);
  CHECK_FALSE(r.records[1].keywords);
  CHECK(ManifestToJsonl(r) == ManifestToJsonl(m));
  CHECK(ThrownKind([] { ManifestFromJsonl("{not json"); }) == ErrorKind::kParse);
}

TEST_CASE("event clips and captions") {
  CHECK(EventNames().size() == kEventCount);
  const std::string c1 = EventCaption({1, 0});
  const std::string c2 = EventCaption({0, 1});
  CHECK(c1 == c2);
  CHECK(c1.find(" and ") != std::string::npos);
  const Waveform w = SynthEventClip({0, 3}, 20.0, 5);
  CHECK(w.duration_s() == doctest::Approx(1.0));
  CHECK(ThrownKind([] { SynthEventClip({kEventCount}, 20.0, 5); }) == ErrorKind::kVocabulary);
}
