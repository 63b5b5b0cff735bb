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

#include <cstring>
#include <fstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "slam_micro/assembly.hpp"
#include "test_util.hpp"

using namespace slam_micro;
using slam_micro::testing::MaxAbsDiff;
using slam_micro::testing::RandomMat;
using slam_micro::testing::ScratchDir;
using slam_micro::testing::ThrownKind;

namespace {

const char* kMinimal = R"(
encoder: {kind: tone_frame}
lm: {preset: tiny}
)";

// Encoder, projector, LLM, dataset and LoRA flag, as in a typical recipe.
const char* kLoraRecipe = R"(
encoder:
  kind: tone_frame
  hidden: 32
  heads: 2
projector:
  kind: linear
  downsample_factor: 5
lm:
  preset: micro
peft:
  rank: 4
  alpha: 8
task: asr
data: data/train/manifest.jsonl
train:
  seed: 7
  steps: 10
)";

AssemblyManifest Small() {
  return ParseConfig(R"(
encoder: {kind: tone_frame, hidden: 16, heads: 2, layers: 1}
projector: {hidden_dim: 16}
lm: {preset: micro, embed_dim: 16, layers: 1, heads: 2}
peft: {rank: 2, alpha: 4}
train: {seed: 3}
)");
}

Mat ModelOutput(const AssembledModel& m, const FeatureSeq& f) {
  const EmbedSeq pre = m.AudioPrefix(f);
  return m.lm().AllLogits(pre.embeddings, TokenSeq{Tokenizer::kTagEn, Tokenizer::kBos, 0, 1}, 1);
}

FeatureSeq Features(std::uint64_t seed) {
  Rng rng(seed);
  return FeatureSeq{RandomMat(23, 40, rng), 50.0};
}

// Perturbs every trainable parameter the way an optimizer step would,
// keeping values float32-representable.
void FakeTrain(AssembledModel& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& p : m.TrainableParameters()) {
    Mat& v = p.var.node()->value;
    v += RandomMat(v.rows(), v.cols(), rng, 0.05);
    nn::RoundToFloat(v);
  }
}

std::uint32_t Le32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

}  // namespace

TEST_CASE("defaults fill a minimal document") {
  const AssemblyManifest m = ParseConfig(kMinimal);
  CHECK(m.encoder.kind == "tone_frame");
  CHECK(m.projector.kind == "linear");
  CHECK(m.projector.downsample_factor == 5);
  CHECK(m.lm.config.embed_dim == 64);
  CHECK(m.task == "asr");
  CHECK_FALSE(m.peft);
  CHECK(m.train.trainable == std::set<std::string>{"projector"});
  REQUIRE(m.train.stages.size() == 1);
}

TEST_CASE("parse errors") {
  CHECK(ThrownKind([] { ParseConfig("projector: {kind: qformer}"); }) == ErrorKind::kParse);
  try {
    ParseConfig("projector: {kind: qformer}");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("query_count required") != std::string::npos);
  }
  CHECK(ThrownKind([] { ParseConfig("encoder: {kind: wav2vec}"); }) == ErrorKind::kResolution);
  CHECK(ThrownKind([] { ParseConfig("projector: {kind: conv}"); }) == ErrorKind::kResolution);
  CHECK(ThrownKind([] { ParseConfig("lm: {preset: huge}"); }) == ErrorKind::kResolution);
  CHECK(ThrownKind([] { ParseConfig("bogus: 1"); }) == ErrorKind::kParse);
  CHECK(ThrownKind([] { ParseConfig("encoder: {kind: tone_frame, colour: red}"); }) ==
        ErrorKind::kParse);
  CHECK(ThrownKind([] { ParseConfig("encoder: [unclosed"); }) == ErrorKind::kParse);
  CHECK(ThrownKind([] { ParseConfig("projector: {downsample_factor: 0}"); }) == ErrorKind::kParse);
  CHECK(ThrownKind([] { ParseConfig("train: {trainable: [decoder]}"); }) == ErrorKind::kPolicy);
  CHECK(ThrownKind([] { ParseConfig("train: {stages: []}"); }) == ErrorKind::kParse);
  CHECK(ThrownKind([] { ParseConfig("peft: {dropout: 1.0}"); }) == ErrorKind::kParse);
  CHECK(ThrownKind([] { ParseConfig("task: tts"); }) == ErrorKind::kResolution);
  try {
    ParseConfig("encoder:\n  kind: tone_frame\n  hiden: 3\n");
  } catch (const Error& e) {
    const std::string what = e.what();
    CHECK(what.find("hiden") != std::string::npos);
    CHECK(what.find("line 3") != std::string::npos);
  }
}

TEST_CASE("a LoRA recipe trains projector and adapters") {
  const AssemblyManifest m = ParseConfig(kLoraRecipe);
  CHECK(m.train.trainable == std::set<std::string>{"projector", "lora"});
  REQUIRE(m.peft);
  CHECK(m.peft->rank == 4);
  CHECK(m.seed == 7);
  CHECK(m.data_train == "data/train/manifest.jsonl");

  const AssemblyManifest ref = ParseConfig("peft: {rank: 32, alpha: 32, dropout: 0.05}");
  CHECK(ref.peft->rank == 32);
  CHECK(ref.peft->alpha == 32.0);
  CHECK(ref.peft->dropout == 0.05);
  const std::string yaml = ManifestToYaml(ref);
  CHECK(yaml.find("rank: 32") != std::string::npos);
  CHECK(yaml.find("dropout: 0.05") != std::string::npos);
}

TEST_CASE("canonical yaml round trips") {
  for (const char* doc : {kMinimal, kLoraRecipe}) {
    const AssemblyManifest m = ParseConfig(doc);
    const AssemblyManifest r = ParseConfig(ManifestToYaml(m));
    CHECK(ManifestDigest(r) == ManifestDigest(m));
    CHECK(ManifestToYaml(r) == ManifestToYaml(m));
  }
}

TEST_CASE("digest binds architecture and seed but not data locations") {
  CHECK(Sha256Hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  const AssemblyManifest base = ParseConfig(kLoraRecipe);
  AssemblyManifest other = base;
  other.seed = 8;
  CHECK(ManifestDigest(other) != ManifestDigest(base));
  other = base;
  other.projector.hidden_dim = 65;
  CHECK(ManifestDigest(other) != ManifestDigest(base));
  other = base;
  other.data_train = "/elsewhere/manifest.jsonl";
  other.output_dir = "/tmp/x";
  CHECK(ManifestDigest(other) == ManifestDigest(base));
  CHECK(ManifestDigest(base).size() == 64);
}

TEST_CASE("build dimensions and determinism") {
  const AssemblyManifest m =
      ParseConfig("lm: {preset: tiny, embed_dim: 32}\npeft: {rank: 4}\n");
  const auto model = BuildModel(m);
  CHECK(model->AudioPrefix(Features(1)).embeddings.cols() == 32);
  for (const auto& p : model->Parameters()) {
    if (p.name.ends_with(".lora_a")) CHECK((p.var.rows() == 4 && p.var.cols() == 32));
    if (p.name.ends_with(".lora_b")) CHECK((p.var.rows() == 32 && p.var.cols() == 4));
  }
  int adapted = 0;
  for (const auto& p : model->Parameters()) adapted += p.name.ends_with(".lora_a");
  CHECK(adapted == 2 * 3);

  const auto again = BuildModel(m);
  const auto a = model->Parameters(), b = again->Parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].var.value() == b[i].var.value());
  }
  CHECK(nn::CountScalars(a) == nn::CountScalars(b));

  AssemblyManifest seeded = m;
  seeded.seed = 99;
  CHECK(BuildModel(seeded)->Parameters()[0].var.value() != a[0].var.value());

  // Projectors are sized from the encoder and LM widths.
  const auto q = BuildModel(ParseConfig(
      "encoder: {kind: identity, input_dim: 40}\nprojector: {kind: qformer, query_count: 4}\n"
      "lm: {preset: micro}"));
  const EmbedSeq out = q->AudioPrefix(Features(3));
  CHECK(out.length() == 4);
  CHECK(out.embeddings.cols() == 32);
}

TEST_CASE("train policies select exact parameter sets") {
  auto model = BuildModel(Small());
  ApplyTrainPolicy(*model, {"projector"});
  for (const auto& p : model->Parameters()) {
    CHECK(p.var.requires_grad() == (ComponentOf(p.name) == "projector"));
  }
  ApplyTrainPolicy(*model, {"projector", "lora"});
  for (const auto& p : model->Parameters()) {
    const auto c = ComponentOf(p.name);
    CHECK(p.var.requires_grad() == (c == "projector" || c == "lora"));
  }
  ApplyTrainPolicy(*model, {});
  CHECK(model->TrainableParameters().empty());
  CHECK(ThrownKind([&] { ApplyTrainPolicy(*model, {"decoder"}); }) == ErrorKind::kPolicy);

  ApplyTrainPolicy(*model, {"encoder.blocks.0.attn"});
  for (const auto& p : model->Parameters()) {
    CHECK(p.var.requires_grad() == p.name.starts_with("encoder.blocks.0.attn."));
  }
  CHECK(ComponentOf("lm.blocks.0.attn.q.lora_a") == "lora");
  CHECK(ComponentOf("lm.blocks.0.attn.q.w") == "lm");
}

TEST_CASE("asset bundles hold exactly the trainable parameters") {
  const auto dir = ScratchDir("assets");
  auto model = BuildModel(Small());
  ApplyTrainPolicy(*model, {"projector"});
  const AssetBundle proj = SaveAssets(*model, dir / "p.slma");
  for (const auto& e : proj.entries) CHECK(e.name.starts_with("projector."));
  CHECK(proj.entries.size() == model->TrainableParameters().size());

  ApplyTrainPolicy(*model, {"projector", "lora"});
  const AssetBundle both = SaveAssets(*model, dir / "b.slma");
  std::set<std::string> names;
  for (const auto& e : both.entries) names.insert(e.name);
  CHECK(names == model->TrainableNames());
  int a = 0, b = 0;
  for (const auto& n : names) a += n.ends_with(".lora_a"), b += n.ends_with(".lora_b");
  CHECK(a == 2);
  CHECK(b == 2);

  const AssetBundle reread = ReadBundle(dir / "b.slma");
  CHECK(reread.Serialize() == both.Serialize());
  CHECK(reread.manifest_digest == ManifestDigest(model->manifest()));

  ApplyTrainPolicy(*model, {});
  CHECK(ThrownKind([&] { SaveAssets(*model, dir / "none.slma"); }) == ErrorKind::kContract);
  ApplyTrainPolicy(*model, {"projector"});
  std::ofstream(dir / "file") << "x";
  CHECK(ThrownKind([&] { SaveAssets(*model, dir / "file" / "y.slma"); }) == ErrorKind::kIo);
}

TEST_CASE("SLMA layout matches the documented byte format") {
  AssetBundle b;
  b.manifest_digest = "d";
  b.entries.push_back({"x", {2, 1}, {1.5f, -2.0f}});
  b.entries.push_back({"y", {1, 1}, {0.25f}});
  const std::string bytes = b.Serialize();
  REQUIRE(bytes.size() > 10);
  CHECK(bytes.substr(0, 4) == "SLMA");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  CHECK(static_cast<unsigned char>(bytes[5]) == 0);
  const std::uint32_t hlen = Le32(bytes, 6);
  const auto header = nlohmann::json::parse(bytes.substr(10, hlen));
  CHECK(header["entries"][0]["name"] == "x");
  CHECK(header["entries"][1]["byte_offset"] == 8);
  const std::size_t payload = 10 + hlen;
  CHECK(bytes.size() == payload + 12);
  float f;
  const std::uint32_t raw = Le32(bytes, payload + 4);
  std::memcpy(&f, &raw, 4);
  CHECK(f == -2.0f);
  CHECK(AssetBundle::Deserialize(bytes).Serialize() == bytes);

  CHECK(ThrownKind([&] { AssetBundle::Deserialize("XXXX" + bytes.substr(4)); }) ==
        ErrorKind::kFormat);
  CHECK(ThrownKind([&] { AssetBundle::Deserialize(bytes.substr(0, bytes.size() - 2)); }) ==
        ErrorKind::kFormat);
  std::string v2 = bytes;
  v2[4] = 2;
  CHECK(ThrownKind([&] { AssetBundle::Deserialize(v2); }) == ErrorKind::kFormat);
}

TEST_CASE("loading assets reproduces the trained model bit-exactly") {
  const auto dir = ScratchDir("load");
  const AssemblyManifest m = Small();
  auto trained = BuildModel(m);
  ApplyTrainPolicy(*trained, {"projector", "lora"});
  FakeTrain(*trained, 5);
  const AssetBundle bundle = SaveAssets(*trained, dir / "a.slma");

  auto fresh = BuildModel(m);
  const FeatureSeq f = Features(2);
  CHECK(MaxAbsDiff(ModelOutput(*fresh, f), ModelOutput(*trained, f)) > 0.0);
  LoadAssets(*fresh, ReadBundle(dir / "a.slma"));
  CHECK(MaxAbsDiff(ModelOutput(*fresh, f), ModelOutput(*trained, f)) == 0.0);

  AssemblyManifest other_m = m;
  other_m.seed = 4;
  auto other = BuildModel(other_m);
  try {
    LoadAssets(*other, bundle);
    FAIL("expected a digest mismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kDigestMismatch);
    CHECK(std::string(e.what()).find(bundle.manifest_digest) != std::string::npos);
    CHECK(std::string(e.what()).find(ManifestDigest(other_m)) != std::string::npos);
  }

  AssetBundle corrupt = bundle;
  const std::string dropped = corrupt.entries[1].name;
  corrupt.entries.erase(corrupt.entries.begin() + 1);
  try {
    LoadAssets(*BuildModel(m), corrupt);
    FAIL("expected a missing parameter");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMissingParameter);
    CHECK(std::string(e.what()).find(dropped) != std::string::npos);
  }

  AssetBundle reshaped = bundle;
  reshaped.entries[0].shape = {reshaped.entries[0].shape[1], reshaped.entries[0].shape[0]};
  CHECK(ThrownKind([&] { LoadAssets(*BuildModel(m), reshaped); }) == ErrorKind::kShape);
}

TEST_CASE("config files resolve paths against their directory") {
  const auto dir = ScratchDir("cfg");
  std::ofstream(dir / "c.yaml") << kLoraRecipe;
  AssemblyManifest m = ParseConfigFile(dir / "c.yaml");
  CHECK(m.Resolve(m.data_train) == dir / "data/train/manifest.jsonl");
  const std::string digest = ManifestDigest(m);
  m.AbsolutizePaths();
  CHECK(std::filesystem::path(m.data_train).is_absolute());
  CHECK(ManifestDigest(m) == digest);
  CHECK(ThrownKind([&] { ParseConfigFile(dir / "absent.yaml"); }) == ErrorKind::kIo);
}

TEST_CASE("shipped configs parse") {
  const std::filesystem::path dir = std::filesystem::path(SLAM_MICRO_SOURCE_DIR) / "configs";
  int n = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() != ".yaml") continue;
    ++n;
    AssemblyManifest m;
    CHECK_NOTHROW_MESSAGE(m = ParseConfigFile(e.path()), e.path().string());
    CHECK(!m.data_train.empty());
    // Relative paths point at the repository root.
    CHECK(m.Resolve(m.lm.zoo).lexically_normal() ==
          (dir.parent_path() / "zoo.slma").lexically_normal());
  }
  CHECK(n >= 5);
  const AssemblyManifest c = ParseConfigFile(dir / "curriculum.yaml");
  REQUIRE(c.train.stages.size() == 3);
  CHECK(c.peft->rank == 32);
  CHECK(c.peft->dropout == 0.05);
}
