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
#include <limits>
#include <map>
#include <string>

#include "doctest.h"
#include "slam_micro/trainer.hpp"
#include "test_util.hpp"

using namespace slam_micro;
using slam_micro::testing::MaxAbsDiff;
using slam_micro::testing::RandomMat;
using slam_micro::testing::ScratchDir;
using slam_micro::testing::ThrownKind;

namespace {

AssemblyManifest Tiny(const std::string& train = "") {
  return ParseConfig(R"(
encoder: {kind: tone_frame, hidden: 16, heads: 2, layers: 2}
projector: {hidden_dim: 16}
lm: {preset: micro, embed_dim: 16, layers: 1, heads: 2}
peft: {rank: 2, alpha: 4}
)" + train);
}

std::vector<TrainExample> Examples(int n, std::uint64_t seed) {
  Rng rng(seed);
  Tokenizer tok;
  const char* texts[] = {"ab", "ba ca", "cab", "a b c"};
  std::vector<TrainExample> out;
  for (int i = 0; i < n; ++i) {
    TrainExample ex;
    ex.id = "ex" + std::to_string(i);
    ex.features = FeatureSeq{RandomMat(15, 40, rng), 50.0};
    ex.prompt = {Tokenizer::kTagEn};
    ex.target = tok.Encode(texts[i % 4]);
    out.push_back(std::move(ex));
  }
  return out;
}

std::map<std::string, Mat> Values(const AssembledModel& m) {
  std::map<std::string, Mat> v;
  for (const auto& p : m.Parameters()) v[p.name] = p.var.value();
  return v;
}

}  // namespace

TEST_CASE("frozen encoder and LM are bitwise unchanged after training the projector") {
  const AssemblyManifest m = Tiny("train: {trainable: [projector], steps: 100, batch_size: 2}");
  auto model = BuildModel(m);
  const auto before = Values(*model);
  const TrainReport r = Train(*model, Examples(6, 1), m.train.stages, 1);
  CHECK(r.losses.size() == 100);
  for (const auto& [name, value] : Values(*model)) {
    const double diff = MaxAbsDiff(value, before.at(name));
    if (ComponentOf(name) == "projector") {
      CHECK(diff >= 0.0);
    } else {
      CHECK(diff == 0.0);
    }
  }
  CHECK(r.update_counts.at("projector") == 100);
  CHECK(r.update_counts.at("encoder") == 0);
  CHECK(r.update_counts.at("lm") == 0);
  CHECK(r.update_counts.at("lora") == 0);
}

TEST_CASE("training is deterministic given the seed") {
  const AssemblyManifest m = Tiny("train: {steps: 20, batch_size: 2}");
  auto a = BuildModel(m);
  auto b = BuildModel(m);
  const auto data = Examples(5, 2);
  const TrainReport ra = Train(*a, data, m.train.stages, 9);
  const TrainReport rb = Train(*b, data, m.train.stages, 9);
  CHECK(ra.losses == rb.losses);
  CHECK(ra.ToJson(false).dump() == rb.ToJson(false).dump());
  CHECK_FALSE(ra.ToJson(false).contains("seconds"));
  CHECK(ra.ToJson(true).contains("seconds"));
  auto c = BuildModel(m);
  CHECK(Train(*c, data, m.train.stages, 10).losses != ra.losses);
}

TEST_CASE("three-stage curriculum runs in order with exact update counts") {
  const AssemblyManifest m = Tiny(R"(train:
  batch_size: 2
  stages:
    - {name: projector, trainable: [projector], steps: 4}
    - {name: lora, trainable: [projector, lora], steps: 3}
    - {name: encoder, trainable: [projector, lora, encoder.blocks.1], steps: 2}
)");
  auto model = BuildModel(m);
  const auto data = Examples(4, 3);
  const auto start = Values(*model);
  std::vector<std::map<std::string, Mat>> snapshots;
  int stage_end = 4;
  TrainOptions opts;
  opts.on_step = [&](int step, double) {
    if (step + 1 == stage_end) {
      snapshots.push_back(Values(*model));
      stage_end += snapshots.size() == 1 ? 3 : 2;
    }
  };
  const TrainReport r = Train(*model, data, m.train.stages, 4, opts);
  REQUIRE(r.stages.size() == 3);
  CHECK(r.stages[0].name == "projector");
  CHECK(r.stages[0].first_step == 0);
  CHECK(r.stages[1].first_step == 4);
  CHECK(r.stages[2].first_step == 7);
  CHECK(r.losses.size() == 9);
  CHECK(r.update_counts.at("projector") == 9);
  CHECK(r.update_counts.at("lora") == 5);
  CHECK(r.update_counts.at("encoder") == 2);
  CHECK(r.update_counts.at("lm") == 0);

  REQUIRE(snapshots.size() == 3);
  auto changed = [](const std::map<std::string, Mat>& a, const std::map<std::string, Mat>& b,
                    const std::string& name) { return MaxAbsDiff(a.at(name), b.at(name)) > 0.0; };
  for (const auto& [name, value] : start) {
    const std::string c = ComponentOf(name);
    // Stage 1 only moves the projector.
    if (c != "projector") CHECK_FALSE(changed(start, snapshots[0], name));
    // Stage 2 leaves encoder and LM alone.
    if (c == "encoder" || c == "lm") CHECK_FALSE(changed(snapshots[0], snapshots[1], name));
    // Stage 3 touches only the last encoder block among encoder parameters.
    if (c == "encoder" && !name.starts_with("encoder.blocks.1.")) {
      CHECK_FALSE(changed(snapshots[1], snapshots[2], name));
    }
    if (c == "lm") CHECK_FALSE(changed(start, snapshots[2], name));
  }
}

TEST_CASE("training refuses empty trainable sets and non-finite losses") {
  AssemblyManifest m = Tiny("train: {trainable: [projector], steps: 3}");
  auto model = BuildModel(m);
  std::vector<StageSpec> empty = m.train.stages;
  empty[0].trainable.clear();
  CHECK(ThrownKind([&] { Train(*model, Examples(2, 1), empty, 1); }) == ErrorKind::kPolicy);

  auto broken = BuildModel(m);
  broken->ComponentParameters("projector")[0].var.node()->value(0, 0) =
      std::numeric_limits<double>::quiet_NaN();
  try {
    Train(*broken, Examples(2, 1), m.train.stages, 1);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumeric);
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
  CHECK(ThrownKind([&] { Train(*model, {}, m.train.stages, 1); }) == ErrorKind::kContract);
}

TEST_CASE("loss on a memorized batch keeps falling after burn-in") {
  const AssemblyManifest m = Tiny("train: {trainable: [projector, lora], steps: 300, batch_size: 4, lr: 0.003}");
  auto model = BuildModel(m);
  const TrainReport r = Train(*model, Examples(4, 5), m.train.stages, 2);
  int violations = 0;
  for (std::size_t i = 51; i < r.losses.size(); ++i) {
    if (r.losses[i] > r.losses[i - 1] * 1.05) ++violations;
  }
  CHECK(violations == 0);
  CHECK(r.losses.back() < 0.8 * r.losses.front());
}

TEST_CASE("finite-difference check samples exactly the trainable scalars") {
  auto model = BuildModel(Tiny());
  const auto data = Examples(1, 6);
  ApplyTrainPolicy(*model, {"encoder", "projector", "lm", "lora"});
  // LoRA B starts at zero; give it values so the A gradients are non-trivial.
  Rng rng(1);
  for (auto& p : model->ComponentParameters("lora")) {
    p.var.node()->value = RandomMat(p.var.rows(), p.var.cols(), rng, 0.1);
  }
  const auto all = FiniteDifferenceCheck(*model, data[0], 32, 7);
  REQUIRE(all);
  CHECK(all->sampled.size() == 32);
  CHECK(all->max_rel_error <= 1e-3);

  ApplyTrainPolicy(*model, {"lora"});
  const auto lora = FiniteDifferenceCheck(*model, data[0], 32, 8);
  REQUIRE(lora);
  for (const auto& s : lora->sampled) CHECK(s.find(".lora_") != std::string::npos);
  CHECK(lora->max_rel_error <= 1e-3);

  ApplyTrainPolicy(*model, {});
  CHECK_FALSE(FiniteDifferenceCheck(*model, data[0], 32, 9));
}

TEST_CASE("trained assets cover every stage's parameters") {
  const auto dir = ScratchDir("trainer_assets");
  const AssemblyManifest m = Tiny(R"(train:
  stages:
    - {trainable: [projector], steps: 1}
    - {trainable: [lora], steps: 1}
)");
  auto model = BuildModel(m);
  Train(*model, Examples(2, 1), m.train.stages, 1);
  const AssetBundle b = SaveTrainedAssets(*model, dir / "a.slma");
  std::set<std::string> comps;
  for (const auto& e : b.entries) comps.insert(ComponentOf(e.name));
  CHECK(comps == std::set<std::string>{"projector", "lora"});
}

TEST_CASE("record prompts and targets per task") {
  const TemplateSet t = TemplateSet::Default();
  DatasetRecord r{"a.wav", "the cat", std::vector<std::string>{"cat"}, "der kater", std::nullopt};
  CHECK(RecordPrompt("asr", r, t) == "<|en|>");
  CHECK(RecordPrompt("casr", r, t).find("cat") != std::string::npos);
  CHECK(RecordPrompt("srt", r, t) == "<|de|>");
  CHECK(RecordTarget("asr", r) == "the cat");
  CHECK(RecordTarget("srt", r) == "the cat<|de|>der kater");
  DatasetRecord no_translation{"b.wav", "x", std::nullopt, std::nullopt, std::nullopt};
  CHECK(ThrownKind([&] { RecordTarget("srt", no_translation); }) == ErrorKind::kContract);
  DatasetRecord empty_kw = r;
  empty_kw.keywords = std::vector<std::string>{};
  DatasetRecord no_kw = r;
  no_kw.keywords.reset();
  CHECK(RecordPrompt("casr", empty_kw, t) == RecordPrompt("casr", no_kw, t));
}
