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

#include "slam_micro/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "slam_micro/errors.hpp"
#include "slam_micro/optim.hpp"
#include "slam_micro/recipes.hpp"
#include "slam_micro/synth_corpus.hpp"

namespace slam_micro {
namespace {

struct TextExample {
  Mat prefix;
  TokenSeq prompt;
  TokenSeq target;
};

// Rows of the embedding table for `ids`, each perturbed by N(0, sigma_i^2).
Mat NoisyCopy(const Mat& table, const TokenSeq& ids, const std::vector<double>& sigma, Rng& rng) {
  Mat out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (Eigen::Index j = 0; j < table.cols(); ++j) {
      out(static_cast<Eigen::Index>(i), j) = table(ids[i], j) + sigma[i] * rng.Normal();
    }
  }
  return out;
}

TextExample SampleText(const ZooOptions& o, const Mat& table, Rng& rng) {
  const WordInventory& inv = DefaultInventory();
  const TemplateSet templates = TemplateSet::Default();
  Tokenizer tok;
  std::vector<std::string> words = SplitWords(inv.SampleSentence(rng, 3, 8));
  const double u = rng.Uniform();
  TextExample ex;
  if (u < o.casr_fraction) {
    static const std::vector<std::string> rare = inv.DesignatedRare(50);
    std::string planted = rare[rng.UniformInt(rare.size())];
    words[rng.UniformInt(words.size())] = planted;
    const std::string text = JoinWords(words);
    std::set<std::string> rare_set(rare.begin(), rare.end());
    // Half the examples see their rare words in the list, the rest an empty
    // list, so the model learns both to use and to do without keywords.
    PromptFields f;
    f.tag = "<|en|>";
    f.keywords = std::vector<std::string>{};
    if (rng.Uniform() < 0.5) {
      std::size_t refs = 0;
      for (const auto& w : std::set<std::string>(words.begin(), words.end())) {
        refs += rare_set.contains(w);
      }
      static const std::size_t kSizes[] = {0, 5, 10, 25, 50};
      const std::size_t n = std::max(refs, kSizes[rng.UniformInt(5)]);
      f.keywords = BuildBiasingList(text, InventoryFrequencies(), n, 50, rng.NextU64()).words;
    }
    ex.prompt = tok.Encode(RenderPrompt(templates, "casr", f));
    ex.target = tok.Encode(text);
    TokenSeq heard = ex.target;
    std::size_t at = 0;
    for (const auto& w : words) {
      for (std::size_t c = 0; c < w.size(); ++c, ++at) {
        if (!rare_set.contains(w) || rng.Uniform() >= o.rare_substitution) continue;
        // Half the time a neighbouring tone, otherwise any letter.
        int sub = heard[at];
        if (rng.Uniform() < 0.5) {
          const int d = 1 + static_cast<int>(rng.UniformInt(2));
          sub += rng.Uniform() < 0.5 ? -d : d;
        } else {
          sub = static_cast<int>(rng.UniformInt(26));
        }
        if (sub >= 0 && sub < 26 && sub != heard[at]) heard[at] = sub;
      }
      ++at;  // separator
    }
    ex.prefix = NoisyCopy(table, heard, std::vector<double>(heard.size(), o.prefix_noise), rng);
    return ex;
  }
  const std::string text = JoinWords(words);
  const TokenSeq ids = tok.Encode(text);
  ex.prefix = NoisyCopy(table, ids, std::vector<double>(ids.size(), o.prefix_noise), rng);
  if (u < o.casr_fraction + o.srt_fraction) {
    PromptFields f;
    f.tag = "<|de|>";
    ex.prompt = tok.Encode(RenderPrompt(templates, "srt", f));
    ex.target = tok.Encode(SrtTarget(text, "<|de|>", inv.TranslateSentence(text)));
  } else {
    PromptFields f;
    f.tag = "<|en|>";
    ex.prompt = tok.Encode(RenderPrompt(templates, "asr", f));
    ex.target = ids;
  }
  return ex;
}

void PretrainLm(const ZooOptions& o, ToyLM& lm) {
  nn::ParamList params;
  lm.Collect("lm", params);
  for (auto& p : params) p.var.node()->requires_grad = true;
  Adam opt(params, AdamConfig{o.lr});
  Rng rng = Rng::Derive(o.seed, 200);
  const nn::RunContext ctx{true, &rng};
  for (int step = 0; step < o.lm_steps; ++step) {
    std::vector<TextExample> batch;
    double total = 0.0;
    for (int b = 0; b < o.batch_size; ++b) {
      batch.push_back(SampleText(o, lm.embedding().value(), rng));
      total += static_cast<double>(batch.back().target.size() + 1);
    }
    double loss = 0.0;
    for (const auto& ex : batch) {
      const LmOutput out = lm.Forward(ad::Constant(ex.prefix), ex.prompt, ex.target, ctx);
      loss += out.loss_sum.scalar();
      ad::Scale(out.loss_sum, 1.0 / total).Backward();
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::kNumeric, "non-finite zoo LM loss at step " + std::to_string(step));
    }
    opt.Step();
    if (o.on_step) o.on_step("lm", step, loss / total);
  }
  for (auto& p : params) p.var.node()->requires_grad = false;
}

void PretrainEncoder(const ZooOptions& o, FrameEncoder& enc, nn::Initializer& init) {
  nn::LinearLayer head(enc.output_dim(), kAlphabetSize, init);
  nn::ParamList params;
  enc.Collect("encoder", params);
  head.Collect("head", params);
  for (auto& p : params) p.var.node()->requires_grad = true;
  Adam opt(params, AdamConfig{o.encoder_lr});
  Rng rng = Rng::Derive(o.seed, 300);
  const nn::RunContext ctx{true, &rng};
  const MelConfig mel;
  const int samples_per_symbol = static_cast<int>(ToneSpec{}.symbol_duration_s * kSampleRate);
  for (int step = 0; step < o.encoder_steps; ++step) {
    double loss = 0.0;
    double frames = 0.0;
    std::vector<std::pair<FeatureSeq, std::vector<int>>> batch;
    for (int b = 0; b < o.encoder_batch_size; ++b) {
      const int n = 10 + static_cast<int>(rng.UniformInt(21));
      std::string text;
      for (int i = 0; i < n; ++i) text.push_back(AlphabetChar(static_cast<int>(rng.UniformInt(kAlphabetSize))));
      ToneSpec ts;
      ts.snr_db = rng.Uniform(10.0, 30.0);
      FeatureSeq f = LogMel(SynthUtterance(text, ts, rng.NextU64()), mel);
      // Label each frame with the symbol under its window centre.
      std::vector<int> labels(static_cast<std::size_t>(f.length()));
      for (Eigen::Index t = 0; t < f.length(); ++t) {
        const int centre = static_cast<int>(t) * mel.hop + mel.win / 2;
        labels[static_cast<std::size_t>(t)] =
            AlphabetIndex(text[static_cast<std::size_t>(std::min(n - 1, centre / samples_per_symbol))]);
      }
      frames += static_cast<double>(f.length());
      batch.emplace_back(std::move(f), std::move(labels));
    }
    for (const auto& [f, labels] : batch) {
      const ad::Var logits = head.Forward(enc.Forward(ad::Constant(f.frames), ctx), ctx);
      const ad::Var l = ad::CrossEntropySum(logits, labels);
      loss += l.scalar();
      ad::Scale(l, 1.0 / frames).Backward();
    }
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::kNumeric, "non-finite zoo encoder loss at step " + std::to_string(step));
    }
    opt.Step();
    if (o.on_step) o.on_step("encoder", step, loss / frames);
  }
  for (auto& p : params) p.var.node()->requires_grad = false;
}

}  // namespace

AssetBundle PretrainZoo(const ZooOptions& options) {
  nn::Initializer lm_init(Rng::Derive(options.seed, 3).NextU64());
  nn::Initializer enc_init(Rng::Derive(options.seed, 1).NextU64());
  ToyLM lm(options.lm, lm_init);
  FrameEncoder enc(options.encoder, enc_init);
  PretrainLm(options, lm);
  PretrainEncoder(options, enc, enc_init);
  nn::ParamList params;
  enc.Collect("encoder", params);
  lm.Collect("lm", params);
  AssetBundle b;
  b.vocab = Tokenizer().Table();
  for (const auto& p : params) {
    AssetEntry e;
    e.name = p.name;
    e.shape = {p.var.rows(), p.var.cols()};
    const Mat& v = p.var.value();
    for (Eigen::Index i = 0; i < v.size(); ++i) e.data.push_back(static_cast<float>(v.data()[i]));
    b.entries.push_back(std::move(e));
  }
  b.manifest_digest = Sha256Hex(b.Serialize());
  b.meta = {{"kind", "zoo"},
            {"seed", options.seed},
            {"lm_steps", options.lm_steps},
            {"encoder_steps", options.encoder_steps}};
  return b;
}

}  // namespace slam_micro
