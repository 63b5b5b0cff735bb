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

// Synthetic "tone-code" speech, a toy sound-event domain for captioning,
// WAV and JSON Lines I/O, and the 50 Hz log-mel front end.

#ifndef SLAM_MICRO_SYNTH_CORPUS_HPP_
#define SLAM_MICRO_SYNTH_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "slam_micro/autograd.hpp"
#include "slam_micro/rng.hpp"

namespace slam_micro {

inline constexpr int kSampleRate = 16000;
inline constexpr int kAlphabetSize = 27;  // a-z and space

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRate;

  double duration_s() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate_hz);
  }
};

struct FeatureSeq {
  Mat frames;  // T x D
  double frame_rate_hz = 0.0;

  Eigen::Index length() const { return frames.rows(); }
  Eigen::Index width() const { return frames.cols(); }
};

// Index of c in the tone alphabet ('a'..'z' -> 0..25, ' ' -> 26), or -1.
int AlphabetIndex(char c);
char AlphabetChar(int index);
double ToneFrequencyHz(int alphabet_index);

struct ToneSpec {
  double symbol_duration_s = 0.1;
  double base_hz = 400.0;
  double step_hz = 25.0;
  double amplitude = 0.5;
  // Additive white Gaussian noise relative to the tone power; nullopt = clean.
  std::optional<double> snr_db = 30.0;
};

// One 100 ms tone per character, character index i at 400 + 25 i Hz.
Waveform SynthUtterance(std::string_view text, const ToneSpec& spec, std::uint64_t seed);

// --- toy sound events (captioning domain) ---

inline constexpr int kEventCount = 8;
const std::vector<std::string>& EventNames();
// Caption for a set of event indices: sorted names joined with " and ".
std::string EventCaption(std::vector<int> events);
// Each event lasts 0.5 s; events are played back to back in the given order.
Waveform SynthEventClip(const std::vector<int>& events, double snr_db, std::uint64_t seed);

// --- word inventory ---

// The fixed toy language: word types ordered by Zipf rank, plus a
// deterministic bilingual lexicon used for translation records.
class WordInventory {
 public:
  WordInventory(std::size_t size, std::uint64_t seed, double zipf_exponent = 1.0);

  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(std::size_t rank) const { return words_.at(rank); }
  const std::string& Translate(const std::string& word) const;
  std::string TranslateSentence(std::string_view sentence) const;

  // Zipf draw over ranks.
  std::size_t SampleRank(Rng& rng) const;
  std::string SampleSentence(Rng& rng, int min_words, int max_words) const;
  // Ranks at or above `common_top_k` are the designated rare words.
  std::vector<std::string> DesignatedRare(std::size_t common_top_k) const;

 private:
  std::vector<std::string> words_;
  std::vector<double> cumulative_;
  std::map<std::string, std::string> lexicon_;
};

// The inventory every corpus draws from (200 words, fixed seed).
const WordInventory& DefaultInventory();

// --- dataset manifest ---

struct DatasetRecord {
  std::string audio;
  std::string text;
  std::optional<std::vector<std::string>> keywords;
  std::optional<std::string> translation;
  std::optional<std::string> lang_tag;
};

struct DatasetManifest {
  std::vector<DatasetRecord> records;
  std::string split = "train";
};

std::string ManifestToJsonl(const DatasetManifest& manifest);
DatasetManifest ManifestFromJsonl(std::string_view text, std::string split = "train");
void WriteManifest(const std::filesystem::path& path, const DatasetManifest& manifest);
// Relative audio paths are resolved against the manifest's directory.
DatasetManifest ReadManifest(const std::filesystem::path& path);

enum class CorpusTask { kAsr, kCasr, kSrt, kCaption };
CorpusTask ParseCorpusTask(std::string_view name);
std::string_view CorpusTaskName(CorpusTask task);

struct CorpusSpec {
  std::uint64_t seed = 1;
  int n_utts = 64;
  int min_words = 3;
  int max_words = 8;
  CorpusTask task = CorpusTask::kAsr;
  double snr_db = 30.0;
  std::size_t common_top_k = 50;
  std::string split = "train";
};

// Writes utt_XXXX.wav files and manifest.jsonl under out_dir.
DatasetManifest MakeCorpus(const CorpusSpec& spec, const std::filesystem::path& out_dir);

// --- audio I/O and features ---

void WriteWav(const std::filesystem::path& path, const Waveform& wave);
Waveform ReadWav(const std::filesystem::path& path);
// 16-bit quantisation applied by WriteWav, without touching disk.
Waveform QuantizePcm16(const Waveform& wave);

struct MelConfig {
  int n_mels = 40;
  int hop = 320;
  int win = 640;
  double f_min = 0.0;
  double f_max = 8000.0;
  double epsilon = 1e-6;
};

// HTK-spaced triangular filters, n_mels x (win/2 + 1).
Mat MelFilterbank(const MelConfig& cfg, int sample_rate_hz);
FeatureSeq LogMel(const Waveform& wave, const MelConfig& cfg = {});

}  // namespace slam_micro

#endif  // SLAM_MICRO_SYNTH_CORPUS_HPP_
