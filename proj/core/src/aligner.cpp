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

#include "slam_micro/aligner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "slam_micro/assembly.hpp"
#include "slam_micro/errors.hpp"
#include "slam_micro/optim.hpp"

namespace slam_micro {
namespace {

using nlohmann::json;

json ConfigJson(const AlignerConfig& c) {
  const auto& f = c.audio.frame;
  return json{{"audio",
               {{"input_dim", f.input_dim},
                {"hidden", f.hidden},
                {"layers", f.layers},
                {"heads", f.heads},
                {"use_positions", f.use_positions},
                {"attention", f.attention_enabled}}},
              {"embed_dim", c.embed_dim},
              {"text_width", c.text_width},
              {"text_layers", c.text_layers},
              {"text_heads", c.text_heads},
              {"init_temperature", c.init_temperature}};
}

AlignerConfig ConfigFromJson(const json& j) {
  AlignerConfig c;
  const auto& a = j.at("audio");
  c.audio.frame.input_dim = a.at("input_dim");
  c.audio.frame.hidden = a.at("hidden");
  c.audio.frame.layers = a.at("layers");
  c.audio.frame.heads = a.at("heads");
  c.audio.frame.use_positions = a.at("use_positions");
  c.audio.frame.attention_enabled = a.at("attention");
  c.embed_dim = j.at("embed_dim");
  c.audio.output_dim = c.embed_dim;
  c.text_width = j.at("text_width");
  c.text_layers = j.at("text_layers");
  c.text_heads = j.at("text_heads");
  c.init_temperature = j.at("init_temperature");
  return c;
}

}  // namespace

DualEncoder::DualEncoder(const AlignerConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg.audio.output_dim != cfg.embed_dim) {
    throw Error(ErrorKind::kAssembly, "audio branch width " + std::to_string(cfg.audio.output_dim) +
                                          " != embedding width " + std::to_string(cfg.embed_dim));
  }
  nn::Initializer audio_init(Rng::Derive(seed, 11).NextU64());
  nn::Initializer text_init(Rng::Derive(seed, 12).NextU64());
  audio_ = SequenceEncoder(cfg.audio, audio_init);
  text_embed_ = nn::Leaf(text_init.Normal(Tokenizer::kVocabSize, cfg.text_width, 1.0));
  for (int i = 0; i < cfg.text_layers; ++i) {
    text_blocks_.emplace_back(cfg.text_width, cfg.text_heads, text_init);
  }
  text_ln_ = nn::LayerNormLayer(cfg.text_width);
  text_proj_ = nn::LinearLayer(cfg.text_width, cfg.embed_dim, text_init);
  log_scale_ = nn::Leaf(Mat::Constant(1, 1, std::log(1.0 / cfg.init_temperature)));
}

ad::Var DualEncoder::AudioForward(const ad::Var& features, const nn::RunContext& ctx) const {
  return ad::L2NormalizeRows(audio_.Forward(features, ctx));
}

ad::Var DualEncoder::TextForward(std::span<const int> tokens, const nn::RunContext& ctx) const {
  if (tokens.empty()) throw Error(ErrorKind::kVocabulary, "empty text has no embedding");
  ad::Var h = ad::GatherRows(text_embed_, tokens);
  h = ad::Add(h, ad::Constant(nn::SinusoidalPositions(h.rows(), cfg_.text_width)));
  for (const auto& b : text_blocks_) h = b.Forward(h, false, true, ctx);
  h = ad::MeanRows(text_ln_.Forward(h));
  return ad::L2NormalizeRows(text_proj_.Forward(h, ctx));
}

RowVec DualEncoder::EmbedAudio(const FeatureSeq& features) const {
  if (features.length() == 0) throw Error(ErrorKind::kEmptyFeature, "no audio frames");
  return AudioForward(ad::Constant(features.frames), {}).value().row(0);
}

RowVec DualEncoder::EmbedText(std::string_view text) const {
  const TokenSeq ids = tokenizer_.Encode(text);
  return TextForward(ids, {}).value().row(0);
}

double DualEncoder::logit_scale() const { return std::exp(log_scale_.scalar()); }

void DualEncoder::Collect(const std::string& prefix, nn::ParamList& out) const {
  audio_.Collect(prefix + ".audio", out);
  out.push_back({prefix + ".text.embed", text_embed_});
  for (std::size_t i = 0; i < text_blocks_.size(); ++i) {
    text_blocks_[i].Collect(prefix + ".text.blocks." + std::to_string(i), out);
  }
  text_ln_.Collect(prefix + ".text.final_ln", out);
  text_proj_.Collect(prefix + ".text.proj", out);
  out.push_back({prefix + ".log_logit_scale", log_scale_});
}

double Similarity(const RowVec& u, const RowVec& v) { return u.dot(v); }

AlignerTrainReport TrainAligner(DualEncoder& model,
                                const std::vector<std::pair<FeatureSeq, std::string>>& pairs,
                                const AlignerTrainOptions& options) {
  if (pairs.size() < 2) throw Error(ErrorKind::kContract, "contrastive training needs >= 2 pairs");
  const int batch = std::min<int>(options.batch_size, static_cast<int>(pairs.size()));
  if (batch < 2) throw Error(ErrorKind::kContract, "contrastive batch size must be >= 2");
  nn::ParamList params;
  model.Collect("aligner", params);
  for (auto& p : params) p.var.node()->requires_grad = true;
  Adam opt(params, AdamConfig{options.lr});
  Rng order_rng = Rng::Derive(options.seed, 21);
  Rng dropout_rng = Rng::Derive(options.seed, 22);
  Tokenizer tok;
  std::vector<TokenSeq> texts;
  for (const auto& p : pairs) texts.push_back(tok.Encode(p.second));
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t pos = order.size();
  AlignerTrainReport report;
  const nn::RunContext ctx{true, &dropout_rng};
  for (int step = 0; step < options.steps; ++step) {
    std::vector<ad::Var> audio, text;
    for (int b = 0; b < batch; ++b) {
      if (pos == order.size()) {
        order_rng.Shuffle(order);
        pos = 0;
      }
      const std::size_t i = order[pos++];
      audio.push_back(model.AudioForward(ad::Constant(pairs[i].first.frames), ctx));
      text.push_back(model.TextForward(texts[i], ctx));
    }
    ad::Var a = ad::ConcatRows(audio);
    ad::Var t = ad::ConcatRows(text);
    ad::Var logits = ad::ScaleBy(ad::MatMulNT(a, t), ad::Exp(model.log_logit_scale()));
    std::vector<int> diag(static_cast<std::size_t>(batch));
    std::iota(diag.begin(), diag.end(), 0);
    ad::Var loss = ad::Scale(ad::Add(ad::CrossEntropySum(logits, diag),
                                     ad::CrossEntropySum(ad::Transpose(logits), diag)),
                             0.5 / batch);
    if (!std::isfinite(loss.scalar())) {
      throw Error(ErrorKind::kNumeric, "non-finite aligner loss at step " + std::to_string(step));
    }
    report.losses.push_back(loss.scalar());
    loss.Backward();
    opt.Step();
  }
  for (auto& p : params) p.var.node()->requires_grad = false;
  return report;
}

void SaveAligner(const DualEncoder& model, const std::filesystem::path& path) {
  nn::ParamList params;
  model.Collect("aligner", params);
  AssetBundle b;
  const json cfg = ConfigJson(model.config());
  b.manifest_digest = Sha256Hex(cfg.dump());
  b.vocab = Tokenizer().Table();
  b.meta = json{{"kind", "aligner"}, {"config", cfg}};
  for (const auto& p : params) {
    AssetEntry e;
    e.name = p.name;
    e.shape = {p.var.rows(), p.var.cols()};
    for (Eigen::Index i = 0; i < p.var.value().size(); ++i) {
      e.data.push_back(static_cast<float>(p.var.value().data()[i]));
    }
    b.entries.push_back(std::move(e));
  }
  WriteBundle(path, b);
}

DualEncoder LoadAligner(const std::filesystem::path& path) {
  const AssetBundle b = ReadBundle(path);
  if (!b.meta.is_object() || b.meta.value("kind", "") != "aligner") {
    throw Error(ErrorKind::kFormat, path.string() + " is not an aligner bundle");
  }
  const AlignerConfig cfg = ConfigFromJson(b.meta.at("config"));
  if (Sha256Hex(ConfigJson(cfg).dump()) != b.manifest_digest) {
    throw Error(ErrorKind::kDigestMismatch, "aligner config digest mismatch in " + path.string());
  }
  DualEncoder model(cfg, 0);
  nn::ParamList params;
  model.Collect("aligner", params);
  LoadBaseWeights(params, b);
  return model;
}

Datastore BuildDatastore(const DualEncoder& model, const std::vector<std::string>& captions) {
  Datastore ds;
  ds.captions = captions;
  ds.embeddings.resize(static_cast<Eigen::Index>(captions.size()), model.config().embed_dim);
  for (std::size_t i = 0; i < captions.size(); ++i) {
    ds.embeddings.row(static_cast<Eigen::Index>(i)) = model.EmbedText(captions[i]);
  }
  return ds;
}

std::vector<Retrieved> Retrieve(const Datastore& ds, const RowVec& query, std::size_t k) {
  if (k > ds.size()) {
    throw Error(ErrorKind::kSize, "k=" + std::to_string(k) + " exceeds datastore size " +
                                      std::to_string(ds.size()));
  }
  std::vector<Retrieved> all;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    all.push_back({i, ds.captions[i], ds.embeddings.row(static_cast<Eigen::Index>(i)).dot(query)});
  }
  std::stable_sort(all.begin(), all.end(),
                   [](const Retrieved& a, const Retrieved& b) { return a.score > b.score; });
  all.resize(k);
  return all;
}

RowVec ProjectToTextSpace(const RowVec& audio_emb, const Datastore& ds, double tau_p) {
  if (ds.size() == 0) throw Error(ErrorKind::kContract, "projection needs a non-empty datastore");
  if (!(tau_p > 0.0)) throw Error(ErrorKind::kContract, "tau_p must be positive");
  Eigen::VectorXd logits = (ds.embeddings * audio_emb.transpose()) / tau_p;
  const double m = logits.maxCoeff();
  Eigen::VectorXd w = (logits.array() - m).exp();
  w /= w.sum();
  RowVec out = w.transpose() * ds.embeddings;
  return out / out.norm();
}

void SaveDatastore(const Datastore& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "captions.json");
    if (!out) throw Error(ErrorKind::kIo, "cannot write " + (dir / "captions.json").string());
    out << json(ds.captions).dump(1) << "\n";
  }
  AssetBundle b;
  b.manifest_digest = Sha256Hex(json(ds.captions).dump());
  AssetEntry e;
  e.name = "embeddings";
  e.shape = {ds.embeddings.rows(), ds.embeddings.cols()};
  for (Eigen::Index i = 0; i < ds.embeddings.size(); ++i) {
    e.data.push_back(static_cast<float>(ds.embeddings.data()[i]));
  }
  b.entries.push_back(std::move(e));
  WriteBundle(dir / "embeddings.slma", b);
}

Datastore LoadDatastore(const std::filesystem::path& dir) {
  std::ifstream in(dir / "captions.json");
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + (dir / "captions.json").string());
  Datastore ds;
  ds.captions = json::parse(in).get<std::vector<std::string>>();
  const AssetBundle b = ReadBundle(dir / "embeddings.slma");
  if (b.manifest_digest != Sha256Hex(json(ds.captions).dump())) {
    throw Error(ErrorKind::kDigestMismatch, "datastore captions and embeddings disagree");
  }
  if (b.entries.size() != 1 || b.entries[0].shape.size() != 2 ||
      b.entries[0].shape[0] != static_cast<std::int64_t>(ds.captions.size())) {
    throw Error(ErrorKind::kFormat, "datastore embedding matrix has the wrong shape");
  }
  ds.embeddings.resize(b.entries[0].shape[0], b.entries[0].shape[1]);
  for (Eigen::Index i = 0; i < ds.embeddings.size(); ++i) {
    ds.embeddings.data()[i] = b.entries[0].data[static_cast<std::size_t>(i)];
  }
  // float32 storage breaks exact unit norm; renormalize on load.
  ds.embeddings.rowwise().normalize();
  return ds;
}

}  // namespace slam_micro
