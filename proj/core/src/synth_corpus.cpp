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

#include "slam_micro/synth_corpus.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "slam_micro/errors.hpp"

namespace slam_micro {
namespace {

using json = nlohmann::json;

double NoiseSigma(double amplitude, double snr_db) {
  const double signal_power = 0.5 * amplitude * amplitude;
  return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

void AddNoiseAndClip(std::vector<double>& samples, std::optional<double> sigma, Rng& rng) {
  for (double& s : samples) {
    if (sigma) s += *sigma * rng.Normal();
    s = std::clamp(s, -1.0, 1.0);
  }
}

std::string RandomWord(Rng& rng, int min_len, int max_len) {
  const int len = min_len + static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(max_len - min_len + 1)));
  std::string w;
  for (int i = 0; i < len; ++i) w.push_back(static_cast<char>('a' + rng.UniformInt(26)));
  return w;
}

std::vector<std::string> SplitWords(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

void PutU16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void PutU32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>(v >> 24)};
  os.write(b, 4);
}

std::uint32_t GetU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t GetU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// FFTW planning is not thread-safe; plans are created once per size.
std::mutex& FftwMutex() {
  static std::mutex m;
  return m;
}

}  // namespace

int AlphabetIndex(char c) {
  if (c >= 'a' && c <= 'z') return c - 'a';
  if (c == ' ') return 26;
  return -1;
}

char AlphabetChar(int index) {
  if (index >= 0 && index < 26) return static_cast<char>('a' + index);
  if (index == 26) return ' ';
  throw Error(ErrorKind::kVocabulary, "alphabet index " + std::to_string(index) + " out of range");
}

double ToneFrequencyHz(int alphabet_index) { return 400.0 + 25.0 * alphabet_index; }

Waveform SynthUtterance(std::string_view text, const ToneSpec& spec, std::uint64_t seed) {
  const int per_symbol = static_cast<int>(std::lround(spec.symbol_duration_s * kSampleRate));
  Waveform w;
  w.samples.reserve(text.size() * static_cast<std::size_t>(per_symbol));
  for (char c : text) {
    const int idx = AlphabetIndex(c);
    if (idx < 0) {
      throw Error(ErrorKind::kVocabulary,
                  std::string("character '") + c + "' is not in the tone alphabet");
    }
    const double f = spec.base_hz + spec.step_hz * idx;
    for (int n = 0; n < per_symbol; ++n) {
      w.samples.push_back(spec.amplitude * std::sin(2.0 * M_PI * f * n / kSampleRate));
    }
  }
  Rng rng(seed);
  std::optional<double> sigma;
  if (spec.snr_db) sigma = NoiseSigma(spec.amplitude, *spec.snr_db);
  AddNoiseAndClip(w.samples, sigma, rng);
  return w;
}

const std::vector<std::string>& EventNames() {
  static const std::vector<std::string> names = {"bell", "bird", "car",  "dog",
                                                 "drum", "horn", "rain", "wind"};
  return names;
}

std::string EventCaption(std::vector<int> events) {
  std::vector<std::string> names;
  for (int e : events) {
    if (e < 0 || e >= kEventCount) throw Error(ErrorKind::kVocabulary, "unknown event index");
    names.push_back(EventNames()[static_cast<std::size_t>(e)]);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += " and ";
    out += names[i];
  }
  return out;
}

Waveform SynthEventClip(const std::vector<int>& events, double snr_db, std::uint64_t seed) {
  constexpr int kPerEvent = kSampleRate / 2;
  constexpr double kAmp = 0.3;
  Waveform w;
  for (int e : events) {
    if (e < 0 || e >= kEventCount) throw Error(ErrorKind::kVocabulary, "unknown event index");
    const double f1 = 1200.0 + 150.0 * e;
    const double f2 = 2500.0 + 210.0 * e;
    const double am = 4.0 + 3.0 * e;
    for (int n = 0; n < kPerEvent; ++n) {
      const double t = static_cast<double>(n) / kSampleRate;
      const double env = 0.5 * (1.0 + std::sin(2.0 * M_PI * am * t));
      w.samples.push_back(kAmp * env *
                          (std::sin(2.0 * M_PI * f1 * t) + std::sin(2.0 * M_PI * f2 * t)));
    }
  }
  Rng rng(seed);
  AddNoiseAndClip(w.samples, NoiseSigma(kAmp, snr_db), rng);
  return w;
}

WordInventory::WordInventory(std::size_t size, std::uint64_t seed, double zipf_exponent) {
  Rng rng(seed);
  std::set<std::string> seen;
  while (words_.size() < size) {
    // Frequent words are shorter, as in natural languages.
    const bool frequent = words_.size() < 50;
    std::string w = frequent ? RandomWord(rng, 2, 3) : RandomWord(rng, 3, 5);
    if (seen.insert(w).second) words_.push_back(std::move(w));
  }
  std::set<std::string> targets;
  for (const auto& w : words_) {
    std::string t;
    do {
      t = RandomWord(rng, 2, 4);
    } while (!targets.insert(t).second);
    lexicon_[w] = t;
  }
  double total = 0.0;
  for (std::size_t r = 0; r < size; ++r) {
    total += 1.0 / std::pow(static_cast<double>(r + 1), zipf_exponent);
    cumulative_.push_back(total);
  }
  for (double& c : cumulative_) c /= total;
}

const std::string& WordInventory::Translate(const std::string& word) const {
  auto it = lexicon_.find(word);
  if (it == lexicon_.end()) throw Error(ErrorKind::kVocabulary, "no translation for '" + word + "'");
  return it->second;
}

std::string WordInventory::TranslateSentence(std::string_view sentence) const {
  std::string out;
  for (const auto& w : SplitWords(sentence)) {
    if (!out.empty()) out += ' ';
    out += Translate(w);
  }
  return out;
}

std::size_t WordInventory::SampleRank(Rng& rng) const {
  const double u = rng.Uniform();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) return cumulative_.size() - 1;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

std::string WordInventory::SampleSentence(Rng& rng, int min_words, int max_words) const {
  const int n = min_words + static_cast<int>(rng.UniformInt(static_cast<std::uint64_t>(max_words - min_words + 1)));
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += words_[SampleRank(rng)];
  }
  return s;
}

std::vector<std::string> WordInventory::DesignatedRare(std::size_t common_top_k) const {
  std::vector<std::string> out;
  for (std::size_t r = common_top_k; r < words_.size(); ++r) out.push_back(words_[r]);
  return out;
}

const WordInventory& DefaultInventory() {
  static const WordInventory inv(200, 20240601);
  return inv;
}

std::string ManifestToJsonl(const DatasetManifest& manifest) {
  std::string out;
  for (const auto& r : manifest.records) {
    json j;
    j["audio"] = r.audio;
    j["text"] = r.text;
    if (r.keywords) j["keywords"] = *r.keywords;
    if (r.translation) j["translation"] = *r.translation;
    if (r.lang_tag) j["lang_tag"] = *r.lang_tag;
    out += j.dump();
    out += '\n';
  }
  return out;
}

DatasetManifest ManifestFromJsonl(std::string_view text, std::string split) {
  DatasetManifest m;
  m.split = std::move(split);
  std::istringstream is{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::kParse, "manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("audio") || !j.contains("text")) {
      throw Error(ErrorKind::kParse,
                  "manifest line " + std::to_string(line_no) + ": needs 'audio' and 'text'");
    }
    DatasetRecord r;
    r.audio = j.at("audio").get<std::string>();
    r.text = j.at("text").get<std::string>();
    if (j.contains("keywords")) r.keywords = j.at("keywords").get<std::vector<std::string>>();
    if (j.contains("translation")) r.translation = j.at("translation").get<std::string>();
    if (j.contains("lang_tag")) r.lang_tag = j.at("lang_tag").get<std::string>();
    m.records.push_back(std::move(r));
  }
  return m;
}

void WriteManifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot write manifest " + path.string());
  os << ManifestToJsonl(manifest);
  if (!os) throw Error(ErrorKind::kIo, "failed writing manifest " + path.string());
}

DatasetManifest ReadManifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kIo, "cannot read manifest " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  DatasetManifest m = ManifestFromJsonl(ss.str(), path.stem().string());
  const auto base = path.parent_path();
  for (auto& r : m.records) {
    std::filesystem::path p(r.audio);
    if (p.is_relative()) r.audio = (base / p).string();
  }
  return m;
}

CorpusTask ParseCorpusTask(std::string_view name) {
  if (name == "asr") return CorpusTask::kAsr;
  if (name == "casr") return CorpusTask::kCasr;
  if (name == "srt") return CorpusTask::kSrt;
  if (name == "caption") return CorpusTask::kCaption;
  throw Error(ErrorKind::kResolution, "unknown task '" + std::string(name) + "'");
}

std::string_view CorpusTaskName(CorpusTask task) {
  switch (task) {
    case CorpusTask::kAsr: return "asr";
    case CorpusTask::kCasr: return "casr";
    case CorpusTask::kSrt: return "srt";
    case CorpusTask::kCaption: return "caption";
  }
  return "asr";
}

DatasetManifest MakeCorpus(const CorpusSpec& spec, const std::filesystem::path& out_dir) {
  if (spec.n_utts < 1) throw Error(ErrorKind::kContract, "n_utts must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec || !std::filesystem::is_directory(out_dir)) {
    throw Error(ErrorKind::kIo, "cannot create output directory " + out_dir.string());
  }
  const WordInventory& inv = DefaultInventory();
  const std::vector<std::string> rare = inv.DesignatedRare(spec.common_top_k);
  DatasetManifest manifest;
  manifest.split = spec.split;
  ToneSpec tone;
  tone.snr_db = spec.snr_db;
  for (int i = 0; i < spec.n_utts; ++i) {
    Rng rng = Rng::Derive(spec.seed, static_cast<std::uint64_t>(i));
    DatasetRecord rec;
    char name[32];
    std::snprintf(name, sizeof(name), "utt_%04d.wav", i);
    rec.audio = name;
    Waveform wave;
    if (spec.task == CorpusTask::kCaption) {
      std::vector<int> pool(kEventCount);
      for (int e = 0; e < kEventCount; ++e) pool[static_cast<std::size_t>(e)] = e;
      rng.Shuffle(pool);
      const int n_events = 1 + static_cast<int>(rng.UniformInt(3));
      std::vector<int> events(pool.begin(), pool.begin() + n_events);
      rec.text = EventCaption(events);
      wave = SynthEventClip(events, spec.snr_db, rng.NextU64());
    } else {
      std::vector<std::string> words =
          SplitWords(inv.SampleSentence(rng, spec.min_words, spec.max_words));
      if (spec.task == CorpusTask::kCasr) {
        const std::size_t pos = rng.UniformInt(words.size());
        words[pos] = rare[rng.UniformInt(rare.size())];
        std::vector<std::string> kw;
        std::set<std::string> rare_set(rare.begin(), rare.end());
        for (const auto& w : words) {
          if (rare_set.count(w) && std::find(kw.begin(), kw.end(), w) == kw.end()) kw.push_back(w);
        }
        rec.keywords = kw;
      }
      for (std::size_t k = 0; k < words.size(); ++k) {
        if (k) rec.text += ' ';
        rec.text += words[k];
      }
      if (spec.task == CorpusTask::kSrt) {
        rec.translation = inv.TranslateSentence(rec.text);
        rec.lang_tag = "<|de|>";
      }
      wave = SynthUtterance(rec.text, tone, rng.NextU64());
    }
    WriteWav(out_dir / rec.audio, wave);
    manifest.records.push_back(std::move(rec));
  }
  WriteManifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

Waveform QuantizePcm16(const Waveform& wave) {
  Waveform out;
  out.sample_rate_hz = wave.sample_rate_hz;
  out.samples.reserve(wave.samples.size());
  for (double s : wave.samples) {
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
    out.samples.push_back(static_cast<double>(q) / 32767.0);
  }
  return out;
}

void WriteWav(const std::filesystem::path& path, const Waveform& wave) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(wave.samples.size());
  os.write("RIFF", 4);
  PutU32(os, 36 + 2 * n);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  PutU32(os, 16);
  PutU16(os, 1);  // PCM
  PutU16(os, 1);  // mono
  PutU32(os, static_cast<std::uint32_t>(wave.sample_rate_hz));
  PutU32(os, static_cast<std::uint32_t>(wave.sample_rate_hz) * 2);
  PutU16(os, 2);
  PutU16(os, 16);
  os.write("data", 4);
  PutU32(os, 2 * n);
  for (double s : wave.samples) {
    const auto q = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
    PutU16(os, static_cast<std::uint16_t>(q));
  }
  if (!os) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

Waveform ReadWav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorKind::kFormat, path.string() + " is not a RIFF/WAVE file");
  }
  Waveform w;
  std::size_t pos = 12;
  bool have_fmt = false;
  while (pos + 8 <= buf.size()) {
    const std::uint32_t size = GetU32(buf.data() + pos + 4);
    const unsigned char* body = buf.data() + pos + 8;
    if (pos + 8 + size > buf.size()) break;
    if (std::memcmp(buf.data() + pos, "fmt ", 4) == 0) {
      if (GetU16(body) != 1 || GetU16(body + 2) != 1 || GetU16(body + 14) != 16) {
        throw Error(ErrorKind::kFormat, path.string() + ": only 16-bit PCM mono is supported");
      }
      w.sample_rate_hz = static_cast<int>(GetU32(body + 4));
      have_fmt = true;
    } else if (std::memcmp(buf.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw Error(ErrorKind::kFormat, path.string() + ": data before fmt");
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto q = static_cast<std::int16_t>(GetU16(body + 2 * i));
        w.samples[i] = static_cast<double>(q) / 32767.0;
      }
      return w;
    }
    pos += 8 + size + (size & 1);
  }
  throw Error(ErrorKind::kFormat, path.string() + ": missing data chunk");
}

Mat MelFilterbank(const MelConfig& cfg, int sample_rate_hz) {
  const int n_bins = cfg.win / 2 + 1;
  const double mel_lo = HzToMel(cfg.f_min), mel_hi = HzToMel(cfg.f_max);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels + 2));
  for (int i = 0; i < cfg.n_mels + 2; ++i) {
    edges[static_cast<std::size_t>(i)] =
        MelToHz(mel_lo + (mel_hi - mel_lo) * i / static_cast<double>(cfg.n_mels + 1));
  }
  Mat fb = Mat::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double c = edges[static_cast<std::size_t>(m + 1)];
    const double hi = edges[static_cast<std::size_t>(m + 2)];
    for (int k = 0; k < n_bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / cfg.win;
      double wgt = 0.0;
      if (f > lo && f <= c) {
        wgt = (f - lo) / (c - lo);
      } else if (f > c && f < hi) {
        wgt = (hi - f) / (hi - c);
      }
      fb(m, k) = wgt;
    }
  }
  return fb;
}

FeatureSeq LogMel(const Waveform& wave, const MelConfig& cfg) {
  if (wave.sample_rate_hz % cfg.hop != 0) {
    throw Error(ErrorKind::kContract, "hop must divide the sample rate");
  }
  const auto n = static_cast<Eigen::Index>(wave.samples.size());
  if (n < cfg.win) {
    throw Error(ErrorKind::kEmptyFeature, "waveform of " + std::to_string(n) +
                                              " samples is shorter than one window (" +
                                              std::to_string(cfg.win) + ")");
  }
  const Eigen::Index frames = n / cfg.hop;
  const int n_bins = cfg.win / 2 + 1;
  static thread_local Mat fb_cache;
  static thread_local int fb_key[3] = {0, 0, 0};
  if (fb_key[0] != cfg.n_mels || fb_key[1] != cfg.win || fb_key[2] != wave.sample_rate_hz) {
    fb_cache = MelFilterbank(cfg, wave.sample_rate_hz);
    fb_key[0] = cfg.n_mels;
    fb_key[1] = cfg.win;
    fb_key[2] = wave.sample_rate_hz;
  }
  std::vector<double> window(static_cast<std::size_t>(cfg.win));
  for (int i = 0; i < cfg.win; ++i) {
    window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / cfg.win);
  }
  double* in = fftw_alloc_real(static_cast<std::size_t>(cfg.win));
  fftw_complex* out = fftw_alloc_complex(static_cast<std::size_t>(n_bins));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(FftwMutex());
    plan = fftw_plan_dft_r2c_1d(cfg.win, in, out, FFTW_ESTIMATE);
  }
  Eigen::VectorXd power(n_bins);
  FeatureSeq fs;
  fs.frames.resize(frames, cfg.n_mels);
  fs.frame_rate_hz = static_cast<double>(wave.sample_rate_hz) / cfg.hop;
  for (Eigen::Index t = 0; t < frames; ++t) {
    const Eigen::Index start = t * cfg.hop;
    for (int i = 0; i < cfg.win; ++i) {
      const Eigen::Index idx = start + i;
      in[i] = idx < n ? wave.samples[static_cast<std::size_t>(idx)] * window[static_cast<std::size_t>(i)] : 0.0;
    }
    fftw_execute(plan);
    for (int k = 0; k < n_bins; ++k) {
      power(k) = (out[k][0] * out[k][0] + out[k][1] * out[k][1]) / cfg.win;
    }
    Eigen::VectorXd mel = fb_cache * power;
    for (int m = 0; m < cfg.n_mels; ++m) fs.frames(t, m) = std::log(mel(m) + cfg.epsilon);
  }
  {
    std::lock_guard<std::mutex> lock(FftwMutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);
  return fs;
}

}  // namespace slam_micro
