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

// Config-driven model assembly: YAML -> AssemblyManifest -> AssembledModel,
// freeze policies, and the SLMA asset format for tuned parameters.

#ifndef SLAM_MICRO_ASSEMBLY_HPP_
#define SLAM_MICRO_ASSEMBLY_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "slam_micro/encoders.hpp"
#include "slam_micro/lm_core.hpp"
#include "slam_micro/projectors.hpp"

namespace slam_micro {

struct StageSpec {
  std::string name;
  std::set<std::string> trainable;
  int steps = 500;
  double lr = 3e-3;
  int batch_size = 8;
};

struct TrainPolicy {
  std::set<std::string> trainable;
  std::vector<StageSpec> stages;
};

struct EncoderSpec {
  std::string kind = "tone_frame";  // tone_frame | tone_sequence | identity
  FrameEncoderConfig frame;
  int output_dim = 32;  // tone_sequence only
  // Optional pretrained weights bundle; only its encoder.* entries are read.
  std::string zoo;
};

struct ProjectorSpec {
  std::string kind = "linear";  // linear | qformer
  int downsample_factor = 5;
  int hidden_dim = 64;
  int query_count = 0;  // required for qformer
  int layers = 2;
  int heads = 4;
};

struct LmSpec {
  std::string preset = "tiny";
  ToyLmConfig config;
  std::string vocab = "char";
  // Optional pretrained weights bundle; only its lm.* entries are read.
  std::string zoo;
};

struct AssemblyManifest {
  EncoderSpec encoder;
  ProjectorSpec projector;
  LmSpec lm;
  std::optional<LoraConfig> peft;
  TrainPolicy train;
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  std::string task = "asr";  // asr | casr | srt | caption
  std::string data_train;
  std::string data_eval;
  // Directory relative paths (zoo, data, output_dir) are resolved against.
  std::filesystem::path base_dir;

  nlohmann::ordered_json ToJson() const;
  std::filesystem::path Resolve(const std::string& path) const;
  // Rewrites zoo, data and output_dir paths as absolute paths.
  void AbsolutizePaths();
};

// Parses a YAML document. Unknown keys anywhere in the tree are rejected.
AssemblyManifest ParseConfig(const std::string& doc);
// Same, with relative paths resolved against the file's directory.
AssemblyManifest ParseConfigFile(const std::filesystem::path& path);
// Canonical YAML rendering (round-trips through ParseConfig).
std::string ManifestToYaml(const AssemblyManifest& manifest);
// SHA-256 hex digest of the sorted-key JSON form of the manifest. Data
// locations and output_dir are left out; zoo paths are replaced by the
// digest of the referenced file, so relocating a config keeps its digest.
std::string ManifestDigest(const AssemblyManifest& manifest);
std::string Sha256Hex(const std::string& bytes);

// Registered identifiers, for diagnostics and tests.
const std::vector<std::string>& RegisteredEncoders();
const std::vector<std::string>& RegisteredProjectors();
const std::vector<std::string>& RegisteredLmPresets();

class AssembledModel {
 public:
  explicit AssembledModel(const AssemblyManifest& manifest);

  const AssemblyManifest& manifest() const { return manifest_; }
  const Tokenizer& tokenizer() const { return tokenizer_; }
  const ToyLM& lm() const { return lm_; }
  ToyLM& lm() { return lm_; }

  // Encoder output for a feature sequence (T x H, or 1 x E for sequence
  // encoders; identity passes features through).
  ad::Var Encode(const ad::Var& features, const nn::RunContext& ctx) const;
  ad::Var Project(const ad::Var& encoded, const nn::RunContext& ctx) const;
  // Inference path: features -> encoder -> projector.
  EmbedSeq AudioPrefix(const FeatureSeq& features) const;
  std::optional<double> PrefixRate(double feature_rate_hz) const;

  // All parameters, freshly collected (safe after MergeLora).
  nn::ParamList Parameters() const;
  nn::ParamList ComponentParameters(const std::string& component) const;
  nn::ParamList TrainableParameters() const;
  std::set<std::string> TrainableNames() const;

  bool has_encoder_params() const;
  int encoder_width() const;

 private:
  AssemblyManifest manifest_;
  Tokenizer tokenizer_;
  std::optional<FrameEncoder> frame_encoder_;
  std::optional<SequenceEncoder> sequence_encoder_;
  std::optional<LinearProjector> linear_;
  std::optional<QFormerProjector> qformer_;
  ToyLM lm_;
};

// Builds and initializes the model (LoRA attached when peft is present, zoo
// weights loaded when lm.zoo is set); the default train policy is applied.
std::unique_ptr<AssembledModel> BuildModel(const AssemblyManifest& manifest);

// Component of a parameter name: encoder | projector | lm | lora.
std::string ComponentOf(const std::string& param_name);

// Flags exactly the parameters selected by `trainable` as trainable. Entries
// are component names or dotted parameter-name prefixes rooted at a
// component (e.g. "encoder.blocks.1").
void ApplyTrainPolicy(AssembledModel& model, const std::set<std::string>& trainable);
std::set<std::string> SelectParameterNames(const AssembledModel& model,
                                           const std::set<std::string>& selectors);
// Everything any stage tunes: the parameter set an asset bundle carries.
std::set<std::string> AssetSelectors(const AssemblyManifest& manifest);

// --- asset bundles ---

struct AssetEntry {
  std::string name;
  std::vector<std::int64_t> shape;
  std::vector<float> data;
};

struct AssetBundle {
  std::string manifest_digest;
  std::vector<AssetEntry> entries;
  std::vector<std::string> vocab;
  nlohmann::json meta;  // optional free-form provenance

  std::string Serialize() const;
  static AssetBundle Deserialize(const std::string& bytes);
};

AssetBundle MakeBundle(const AssemblyManifest& manifest, const nn::ParamList& params,
                       const std::vector<std::string>& vocab);
void WriteBundle(const std::filesystem::path& path, const AssetBundle& bundle);
AssetBundle ReadBundle(const std::filesystem::path& path);

// Writes the trainable parameters of the model. Throws if none are trainable.
AssetBundle SaveAssets(const AssembledModel& model, const std::filesystem::path& path);
// Overwrites parameters from the bundle after checking the manifest digest.
void LoadAssets(AssembledModel& model, const AssetBundle& bundle);
// Digest-free load of base weights by name (model zoo); every entry must
// name an existing parameter of matching shape.
void LoadBaseWeights(const nn::ParamList& params, const AssetBundle& bundle);
// Same, restricted to the entries of one component; at least one must exist.
void LoadBaseWeights(const nn::ParamList& params, const AssetBundle& bundle,
                     const std::string& component);

}  // namespace slam_micro

#endif  // SLAM_MICRO_ASSEMBLY_HPP_
