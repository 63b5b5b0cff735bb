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

#include "slam_micro/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "slam_micro/errors.hpp"
#include "slam_micro/optim.hpp"

namespace slam_micro {
namespace {

constexpr const char* kComponents[] = {"encoder", "projector", "lm", "lora"};

std::string DefaultTag(const DatasetRecord& r, const std::string& task) {
  if (r.lang_tag) return *r.lang_tag;
  return task == "srt" ? "<|de|>" : "<|en|>";
}

}  // namespace

std::string RecordPrompt(const std::string& task, const DatasetRecord& record,
                         const TemplateSet& templates) {
  PromptFields f;
  if (task == "caption") {
    f.rag_captions = std::vector<std::string>{};
  } else {
    f.tag = DefaultTag(record, task);
  }
  if (task == "casr") f.keywords = record.keywords.value_or(std::vector<std::string>{});
  return RenderPrompt(templates, task, f);
}

std::string RecordTarget(const std::string& task, const DatasetRecord& record) {
  if (task != "srt") return record.text;
  if (!record.translation) {
    throw Error(ErrorKind::kContract, "srt record '" + record.audio + "' has no translation");
  }
  return SrtTarget(record.text, DefaultTag(record, task), *record.translation);
}

std::vector<TrainExample> ExamplesFromDataset(const AssembledModel& model,
                                              const DatasetManifest& data,
                                              const TemplateSet& templates) {
  const std::string& task = model.manifest().task;
  if (task == "caption") {
    throw Error(ErrorKind::kContract, "caption training uses text embeddings, not audio records");
  }
  if (data.records.empty()) throw Error(ErrorKind::kContract, "empty training dataset");
  const Tokenizer& tok = model.tokenizer();
  std::vector<TrainExample> out;
  for (const auto& r : data.records) {
    TrainExample ex;
    ex.id = r.audio;
    ex.features = LogMel(ReadWav(r.audio));
    ex.prompt = tok.Encode(RecordPrompt(task, r, templates));
    ex.target = tok.Encode(RecordTarget(task, r));
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<TrainExample> CaptionTextExamples(const DualEncoder& aligner, const Datastore& ds,
                                              const TemplateSet& templates,
                                              const CaptionTextOptions& options) {
  if (ds.size() < 2) throw Error(ErrorKind::kContract, "caption datastore needs >= 2 captions");
  const std::size_t k = std::min(options.k, ds.size() - 1);
  Tokenizer tok;
  Rng rng(options.seed);
  std::vector<TrainExample> out;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const RowVec t = aligner.EmbedText(ds.captions[i]);
    // The caption itself is excluded from its own context.
    std::vector<std::string> rag;
    for (const auto& r : Retrieve(ds, t, k + 1)) {
      if (r.index != i && rag.size() < k) rag.push_back(r.caption);
    }
    PromptFields f;
    f.rag_captions = rag;
    const TokenSeq prompt = tok.Encode(RenderPrompt(templates, "caption", f));
    for (int c = 0; c < options.copies; ++c) {
      RowVec x = t;
      if (c > 0) {
        for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += options.noise_std * rng.Normal();
        x /= x.norm();
      }
      TrainExample ex;
      ex.id = ds.captions[i] + "#" + std::to_string(c);
      ex.features = FeatureSeq{x, 0.0};
      ex.prompt = prompt;
      ex.target = tok.Encode(ds.captions[i]);
      out.push_back(std::move(ex));
    }
  }
  return out;
}

nlohmann::ordered_json TrainReport::ToJson(bool with_timing) const {
  nlohmann::ordered_json j;
  j["losses"] = losses;
  nlohmann::ordered_json st = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    st.push_back({{"name", s.name},
                  {"first_step", s.first_step},
                  {"steps", s.steps},
                  {"lr", s.lr},
                  {"batch_size", s.batch_size},
                  {"trainable", s.trainable},
                  {"final_loss", s.final_loss}});
  }
  j["stages"] = st;
  j["final_loss"] = losses.empty() ? 0.0 : losses.back();
  if (with_timing) j["seconds"] = seconds;
  j["update_counts"] = update_counts;
  return j;
}

TrainReport Train(AssembledModel& model, const std::vector<TrainExample>& data,
                  const std::vector<StageSpec>& schedule, std::uint64_t seed,
                  const TrainOptions& options) {
  if (data.empty()) throw Error(ErrorKind::kContract, "empty training dataset");
  if (schedule.empty()) throw Error(ErrorKind::kContract, "empty stage schedule");
  for (const auto& s : schedule) {
    if (s.steps < 1 || s.batch_size < 1 || !(s.lr > 0.0)) {
      throw Error(ErrorKind::kContract, "stage '" + s.name + "' needs steps, batch_size, lr > 0");
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  TrainReport report;
  for (const char* c : kComponents) {
    if (!model.ComponentParameters(c).empty()) report.update_counts[c] = 0;
  }
  Rng order_rng = Rng::Derive(seed, 100);
  Rng dropout_rng = Rng::Derive(seed, 101);
  const nn::RunContext ctx{true, &dropout_rng};
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t pos = order.size();
  int step = 0;
  for (const auto& stage : schedule) {
    const std::set<std::string> names = SelectParameterNames(model, stage.trainable);
    ApplyTrainPolicy(model, stage.trainable);
    nn::ParamList params = model.TrainableParameters();
    if (params.empty()) {
      throw Error(ErrorKind::kPolicy, "stage '" + stage.name + "' has nothing to train");
    }
    StageReport sr{stage.name, step, stage.steps, stage.lr, stage.batch_size,
                   std::vector<std::string>(names.begin(), names.end()), 0.0};
    std::set<std::string> touched;
    for (const auto& n : names) touched.insert(ComponentOf(n));

    // A frozen encoder's outputs do not change within the stage.
    std::vector<Mat> cache;
    bool encoder_frozen = true;
    for (const auto& p : params) encoder_frozen &= ComponentOf(p.name) != "encoder";
    if (encoder_frozen) {
      for (const auto& ex : data) {
        cache.push_back(model.Encode(ad::Constant(ex.features.frames), {}).value());
      }
    }
    Adam opt(params, AdamConfig{stage.lr});
    for (int s = 0; s < stage.steps; ++s, ++step) {
      std::vector<std::size_t> batch;
      for (int b = 0; b < stage.batch_size; ++b) {
        if (pos == order.size()) {
          order_rng.Shuffle(order);
          pos = 0;
        }
        batch.push_back(order[pos++]);
      }
      double total = 0.0;
      for (std::size_t i : batch) total += static_cast<double>(data[i].target.size() + 1);
      double loss_sum = 0.0;
      for (std::size_t i : batch) {
        const TrainExample& ex = data[i];
        const ad::Var enc = encoder_frozen ? ad::Constant(cache[i])
                                           : model.Encode(ad::Constant(ex.features.frames), ctx);
        const LmOutput out = model.lm().Forward(model.Project(enc, ctx), ex.prompt, ex.target, ctx);
        loss_sum += out.loss_sum.scalar();
        ad::Scale(out.loss_sum, 1.0 / total).Backward();
      }
      const double loss = loss_sum / total;
      if (!std::isfinite(loss)) {
        throw Error(ErrorKind::kNumeric, "non-finite loss at step " + std::to_string(step) +
                                             " (stage '" + stage.name + "')");
      }
      opt.Step();
      report.losses.push_back(loss);
      for (const auto& c : touched) ++report.update_counts[c];
      if (options.on_step) options.on_step(step, loss);
    }
    sr.final_loss = report.losses.back();
    report.stages.push_back(std::move(sr));
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

AssetBundle SaveTrainedAssets(AssembledModel& model, const std::filesystem::path& path) {
  ApplyTrainPolicy(model, AssetSelectors(model.manifest()));
  return SaveAssets(model, path);
}

double ExampleLoss(const AssembledModel& model, const TrainExample& example) {
  const nn::RunContext ctx{};
  const ad::Var enc = model.Encode(ad::Constant(example.features.frames), ctx);
  return model.lm().Forward(model.Project(enc, ctx), example.prompt, example.target, ctx)
      .mean_loss();
}

std::optional<GradCheckResult> FiniteDifferenceCheck(const AssembledModel& model,
                                                     const TrainExample& example,
                                                     std::size_t sample_size, std::uint64_t seed,
                                                     double h, double floor) {
  const nn::ParamList params = model.TrainableParameters();
  std::vector<std::pair<std::size_t, Eigen::Index>> pool;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (Eigen::Index i = 0; i < params[p].var.value().size(); ++i) pool.emplace_back(p, i);
  }
  if (pool.empty() || sample_size == 0) return std::nullopt;
  Rng rng(seed);
  const std::size_t n = std::min(sample_size, pool.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(pool[i], pool[i + rng.UniformInt(pool.size() - i)]);
  }
  pool.resize(n);

  for (const auto& p : params) p.var.node()->grad.resize(0, 0);
  {
    const nn::RunContext ctx{};
    const ad::Var enc = model.Encode(ad::Constant(example.features.frames), ctx);
    const LmOutput out = model.lm().Forward(model.Project(enc, ctx), example.prompt,
                                            example.target, ctx);
    ad::Scale(out.loss_sum, 1.0 / out.scored).Backward();
  }
  GradCheckResult r;
  for (const auto& [p, i] : pool) {
    const auto& node = params[p].var.node();
    const double analytic = node->grad.size() ? node->grad.data()[i] : 0.0;
    double& w = node->value.data()[i];
    const double saved = w;
    w = saved + h;
    const double up = ExampleLoss(model, example);
    w = saved - h;
    const double down = ExampleLoss(model, example);
    w = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    r.max_rel_error = std::max(r.max_rel_error, std::abs(analytic - numeric) / denom);
    r.sampled.push_back(params[p].name + "[" + std::to_string(i) + "]");
  }
  for (const auto& p : params) p.var.node()->grad.resize(0, 0);
  return r;
}

}  // namespace slam_micro
