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

#include "slam_micro/assembly.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "slam_micro/errors.hpp"

namespace slam_micro {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::set<std::string> kComponents = {"encoder", "projector", "lm", "lora"};

// Typed access to one YAML mapping with unknown-key rejection.
class MapReader {
 public:
  MapReader(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.IsMap()) {
      throw Error(ErrorKind::kParse, Where(node_) + "'" + path_ + "' must be a mapping");
    }
  }

  void Allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.contains(key)) {
        throw Error(ErrorKind::kParse,
                    Where(kv.first) + "unknown key '" + Join(key) + "'");
      }
    }
  }

  bool Has(const char* key) const { return static_cast<bool>(node_[key]); }
  YAML::Node Get(const char* key) const { return node_[key]; }
  std::string Join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  void Read(const char* key, T& out) const {
    const YAML::Node n = node_[key];
    if (!n || n.IsNull()) return;
    try {
      out = n.as<T>();
    } catch (const YAML::Exception&) {
      throw Error(ErrorKind::kParse, Where(n) + "bad value for '" + Join(key) + "'");
    }
  }

  static std::string Where(const YAML::Node& n) {
    const auto m = n.Mark();
    if (m.line < 0) return "";
    return "line " + std::to_string(m.line + 1) + ": ";
  }

 private:
  YAML::Node node_;
  std::string path_;
};

std::set<std::string> ReadNameSet(const YAML::Node& n, const std::string& path) {
  std::set<std::string> out;
  if (!n || n.IsNull()) return out;
  if (!n.IsSequence()) {
    throw Error(ErrorKind::kParse, MapReader::Where(n) + "'" + path + "' must be a list");
  }
  for (const auto& item : n) out.insert(item.as<std::string>());
  return out;
}

void CheckTrainableRoots(const std::set<std::string>& names, const std::string& where) {
  for (const auto& n : names) {
    const std::string root = n.substr(0, n.find('.'));
    if (!kComponents.contains(root)) {
      throw Error(ErrorKind::kPolicy, "unknown component '" + n + "' in " + where);
    }
  }
}

void RequirePositive(int value, const std::string& key) {
  if (value < 1) throw Error(ErrorKind::kParse, "'" + key + "' must be a positive integer");
}

template <typename T>
bool Contains(const std::vector<std::string>& v, const T& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

void ApplyPreset(LmSpec& lm) {
  if (lm.preset == "tiny") {
    lm.config.embed_dim = 64;
    lm.config.layers = 3;
    lm.config.heads = 4;
  } else if (lm.preset == "micro") {
    lm.config.embed_dim = 32;
    lm.config.layers = 2;
    lm.config.heads = 4;
  } else {
    throw Error(ErrorKind::kResolution, "unregistered lm preset '" + lm.preset + "'");
  }
}

std::string EmitScalar(const ordered_json& v) {
  if (v.is_string()) {
    YAML::Emitter e;
    e << YAML::DoubleQuoted << v.get<std::string>();
    return e.c_str();
  }
  return v.dump();
}

void EmitYaml(const ordered_json& v, int indent, std::ostringstream& os) {
  const std::string pad(static_cast<std::size_t>(indent), ' ');
  for (const auto& [key, value] : v.items()) {
    if (value.is_object()) {
      os << pad << key << ":\n";
      EmitYaml(value, indent + 2, os);
    } else if (value.is_array() && !value.empty() && value.front().is_object()) {
      os << pad << key << ":\n";
      for (const auto& item : value) {
        bool first = true;
        for (const auto& [k2, v2] : item.items()) {
          os << pad << (first ? "  - " : "    ") << k2 << ": ";
          if (v2.is_array()) {
            os << "[";
            for (std::size_t i = 0; i < v2.size(); ++i) os << (i ? ", " : "") << EmitScalar(v2[i]);
            os << "]\n";
          } else {
            os << EmitScalar(v2) << "\n";
          }
          first = false;
        }
      }
    } else if (value.is_array()) {
      os << pad << key << ": [";
      for (std::size_t i = 0; i < value.size(); ++i) os << (i ? ", " : "") << EmitScalar(value[i]);
      os << "]\n";
    } else {
      os << pad << key << ": " << EmitScalar(value) << "\n";
    }
  }
}

ordered_json NameSetJson(const std::set<std::string>& s) {
  ordered_json a = ordered_json::array();
  for (const auto& x : s) a.push_back(x);
  return a;
}

}  // namespace

// --- manifest ---

std::filesystem::path AssemblyManifest::Resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void AssemblyManifest::AbsolutizePaths() {
  auto fix = [&](std::string& p) {
    if (!p.empty()) p = std::filesystem::absolute(Resolve(p)).lexically_normal().string();
  };
  fix(encoder.zoo);
  fix(lm.zoo);
  fix(data_train);
  fix(data_eval);
  fix(output_dir);
}

ordered_json AssemblyManifest::ToJson() const {
  ordered_json j;
  ordered_json enc;
  enc["kind"] = encoder.kind;
  enc["input_dim"] = encoder.frame.input_dim;
  if (encoder.kind != "identity") {
    enc["hidden"] = encoder.frame.hidden;
    enc["layers"] = encoder.frame.layers;
    enc["heads"] = encoder.frame.heads;
    enc["use_positions"] = encoder.frame.use_positions;
    enc["attention"] = encoder.frame.attention_enabled;
  }
  if (encoder.kind == "tone_sequence") enc["output_dim"] = encoder.output_dim;
  if (!encoder.zoo.empty()) enc["zoo"] = encoder.zoo;
  j["encoder"] = enc;

  ordered_json proj;
  proj["kind"] = projector.kind;
  if (projector.kind == "linear") {
    proj["downsample_factor"] = projector.downsample_factor;
    proj["hidden_dim"] = projector.hidden_dim;
  } else {
    proj["query_count"] = projector.query_count;
    proj["layers"] = projector.layers;
    proj["heads"] = projector.heads;
  }
  j["projector"] = proj;

  ordered_json lmj;
  lmj["preset"] = lm.preset;
  lmj["embed_dim"] = lm.config.embed_dim;
  lmj["layers"] = lm.config.layers;
  lmj["heads"] = lm.config.heads;
  lmj["tied_output"] = lm.config.tied_output;
  lmj["vocab"] = lm.vocab;
  if (!lm.zoo.empty()) lmj["zoo"] = lm.zoo;
  j["lm"] = lmj;

  if (peft) {
    ordered_json p;
    p["rank"] = peft->rank;
    p["alpha"] = peft->alpha;
    p["dropout"] = peft->dropout;
    p["targets"] = NameSetJson(peft->targets);
    j["peft"] = p;
  }

  ordered_json tr;
  tr["seed"] = seed;
  tr["output_dir"] = output_dir;
  tr["trainable"] = NameSetJson(train.trainable);
  ordered_json stages = ordered_json::array();
  for (const auto& s : train.stages) {
    ordered_json sj;
    sj["name"] = s.name;
    sj["trainable"] = NameSetJson(s.trainable);
    sj["steps"] = s.steps;
    sj["lr"] = s.lr;
    sj["batch_size"] = s.batch_size;
    stages.push_back(sj);
  }
  tr["stages"] = stages;
  j["train"] = tr;
  j["task"] = task;
  ordered_json data;
  if (!data_train.empty()) data["train"] = data_train;
  if (!data_eval.empty()) data["eval"] = data_eval;
  if (!data.empty()) j["data"] = data;
  return j;
}

AssemblyManifest ParseConfig(const std::string& doc) {
  YAML::Node root;
  try {
    root = YAML::Load(doc);
  } catch (const YAML::ParserException& e) {
    throw Error(ErrorKind::kParse, "line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root || root.IsNull()) throw Error(ErrorKind::kParse, "empty configuration document");
  MapReader top(root, "");
  top.Allow({"encoder", "projector", "lm", "peft", "train", "task", "data"});

  AssemblyManifest m;
  if (top.Has("encoder")) {
    MapReader r(top.Get("encoder"), "encoder");
    r.Allow({"kind", "input_dim", "hidden", "layers", "heads", "use_positions", "attention",
             "output_dim", "zoo"});
    r.Read("kind", m.encoder.kind);
    r.Read("input_dim", m.encoder.frame.input_dim);
    r.Read("hidden", m.encoder.frame.hidden);
    r.Read("layers", m.encoder.frame.layers);
    r.Read("heads", m.encoder.frame.heads);
    r.Read("use_positions", m.encoder.frame.use_positions);
    r.Read("attention", m.encoder.frame.attention_enabled);
    r.Read("output_dim", m.encoder.output_dim);
    r.Read("zoo", m.encoder.zoo);
  }
  if (!Contains(RegisteredEncoders(), m.encoder.kind)) {
    throw Error(ErrorKind::kResolution, "unregistered encoder '" + m.encoder.kind + "'");
  }
  RequirePositive(m.encoder.frame.input_dim, "encoder.input_dim");
  if (m.encoder.kind != "identity") {
    RequirePositive(m.encoder.frame.hidden, "encoder.hidden");
    RequirePositive(m.encoder.frame.heads, "encoder.heads");
  }

  if (top.Has("projector")) {
    MapReader r(top.Get("projector"), "projector");
    r.Allow({"kind", "downsample_factor", "hidden_dim", "query_count", "layers", "heads"});
    r.Read("kind", m.projector.kind);
    r.Read("downsample_factor", m.projector.downsample_factor);
    r.Read("hidden_dim", m.projector.hidden_dim);
    r.Read("query_count", m.projector.query_count);
    r.Read("layers", m.projector.layers);
    r.Read("heads", m.projector.heads);
  }
  if (!Contains(RegisteredProjectors(), m.projector.kind)) {
    throw Error(ErrorKind::kResolution, "unregistered projector '" + m.projector.kind + "'");
  }
  if (m.projector.kind == "qformer") {
    if (m.projector.query_count == 0) {
      throw Error(ErrorKind::kParse, "projector.query_count required for qformer");
    }
    RequirePositive(m.projector.query_count, "projector.query_count");
  } else {
    RequirePositive(m.projector.downsample_factor, "projector.downsample_factor");
    RequirePositive(m.projector.hidden_dim, "projector.hidden_dim");
  }

  if (top.Has("lm")) {
    MapReader r(top.Get("lm"), "lm");
    r.Allow({"preset", "embed_dim", "layers", "heads", "tied_output", "vocab", "zoo"});
    r.Read("preset", m.lm.preset);
    ApplyPreset(m.lm);
    r.Read("embed_dim", m.lm.config.embed_dim);
    r.Read("layers", m.lm.config.layers);
    r.Read("heads", m.lm.config.heads);
    r.Read("tied_output", m.lm.config.tied_output);
    r.Read("vocab", m.lm.vocab);
    r.Read("zoo", m.lm.zoo);
  } else {
    ApplyPreset(m.lm);
  }
  if (m.lm.vocab != "char") {
    throw Error(ErrorKind::kResolution, "unregistered vocabulary '" + m.lm.vocab + "'");
  }
  RequirePositive(m.lm.config.embed_dim, "lm.embed_dim");
  RequirePositive(m.lm.config.heads, "lm.heads");

  if (top.Has("peft") && !top.Get("peft").IsNull()) {
    MapReader r(top.Get("peft"), "peft");
    r.Allow({"rank", "alpha", "dropout", "targets"});
    LoraConfig cfg;
    r.Read("rank", cfg.rank);
    r.Read("alpha", cfg.alpha);
    r.Read("dropout", cfg.dropout);
    if (r.Has("targets")) cfg.targets = ReadNameSet(r.Get("targets"), "peft.targets");
    RequirePositive(cfg.rank, "peft.rank");
    if (cfg.alpha <= 0.0) throw Error(ErrorKind::kParse, "'peft.alpha' must be positive");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0) {
      throw Error(ErrorKind::kParse, "'peft.dropout' must lie in [0, 1)");
    }
    for (const auto& t : cfg.targets) {
      if (t != "query" && t != "key" && t != "value" && t != "output") {
        throw Error(ErrorKind::kResolution, "unregistered LoRA target '" + t + "'");
      }
    }
    m.peft = cfg;
  }

  m.train.trainable = {"projector"};
  if (m.peft) m.train.trainable.insert("lora");
  StageSpec defaults;
  defaults.name = "main";
  bool explicit_stages = false;
  if (top.Has("train")) {
    MapReader r(top.Get("train"), "train");
    r.Allow({"seed", "trainable", "output_dir", "steps", "lr", "batch_size", "stages"});
    r.Read("seed", m.seed);
    r.Read("output_dir", m.output_dir);
    if (r.Has("trainable")) m.train.trainable = ReadNameSet(r.Get("trainable"), "train.trainable");
    r.Read("steps", defaults.steps);
    r.Read("lr", defaults.lr);
    r.Read("batch_size", defaults.batch_size);
    if (r.Has("stages")) {
      const YAML::Node list = r.Get("stages");
      if (!list.IsSequence() || list.size() == 0) {
        throw Error(ErrorKind::kParse, "'train.stages' must be a non-empty list");
      }
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string path = "train.stages[" + std::to_string(i) + "]";
        MapReader s(list[i], path);
        s.Allow({"name", "trainable", "steps", "lr", "batch_size"});
        StageSpec st = defaults;
        st.name = "stage" + std::to_string(i + 1);
        st.trainable = m.train.trainable;
        s.Read("name", st.name);
        if (s.Has("trainable")) st.trainable = ReadNameSet(s.Get("trainable"), path + ".trainable");
        s.Read("steps", st.steps);
        s.Read("lr", st.lr);
        s.Read("batch_size", st.batch_size);
        m.train.stages.push_back(st);
      }
      explicit_stages = true;
    }
  }
  if (!explicit_stages) {
    defaults.trainable = m.train.trainable;
    m.train.stages.push_back(defaults);
  }
  CheckTrainableRoots(m.train.trainable, "train.trainable");
  for (const auto& s : m.train.stages) {
    CheckTrainableRoots(s.trainable, "stage '" + s.name + "'");
    RequirePositive(s.steps, "stage '" + s.name + "' steps");
    RequirePositive(s.batch_size, "stage '" + s.name + "' batch_size");
    if (!(s.lr > 0.0)) throw Error(ErrorKind::kParse, "stage '" + s.name + "' lr must be > 0");
  }

  top.Read("task", m.task);
  if (m.task != "asr" && m.task != "casr" && m.task != "srt" && m.task != "caption") {
    throw Error(ErrorKind::kResolution, "unregistered task '" + m.task + "'");
  }
  if (top.Has("data")) {
    const YAML::Node d = top.Get("data");
    if (d.IsScalar()) {
      m.data_train = d.as<std::string>();
    } else if (!d.IsNull()) {
      MapReader r(d, "data");
      r.Allow({"train", "eval"});
      r.Read("train", m.data_train);
      r.Read("eval", m.data_eval);
    }
  }
  return m;
}

AssemblyManifest ParseConfigFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  AssemblyManifest m = ParseConfig(ss.str());
  m.base_dir = path.parent_path();
  return m;
}

std::string ManifestToYaml(const AssemblyManifest& manifest) {
  std::ostringstream os;
  EmitYaml(manifest.ToJson(), 0, os);
  return os.str();
}

std::string Sha256Hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::kIo, "SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 15]);
  }
  return out;
}

std::string ManifestDigest(const AssemblyManifest& manifest) {
  // nlohmann::json keeps object keys sorted, which is the canonical form.
  json canonical = json::parse(manifest.ToJson().dump());
  canonical.erase("data");
  canonical["train"].erase("output_dir");
  for (const char* part : {"encoder", "lm"}) {
    auto& node = canonical[part];
    if (!node.contains("zoo")) continue;
    const std::filesystem::path p = manifest.Resolve(node["zoo"].get<std::string>());
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot read zoo weights " + p.string());
    std::stringstream ss;
    ss << in.rdbuf();
    node["zoo"] = "sha256:" + Sha256Hex(ss.str());
  }
  return Sha256Hex(canonical.dump());
}

const std::vector<std::string>& RegisteredEncoders() {
  static const std::vector<std::string> k = {"tone_frame", "tone_sequence", "identity"};
  return k;
}

const std::vector<std::string>& RegisteredProjectors() {
  static const std::vector<std::string> k = {"linear", "qformer"};
  return k;
}

const std::vector<std::string>& RegisteredLmPresets() {
  static const std::vector<std::string> k = {"tiny", "micro"};
  return k;
}

// --- model ---

AssembledModel::AssembledModel(const AssemblyManifest& manifest) : manifest_(manifest) {
  const std::uint64_t seed = manifest.seed;
  nn::Initializer enc_init(Rng::Derive(seed, 1).NextU64());
  nn::Initializer proj_init(Rng::Derive(seed, 2).NextU64());
  nn::Initializer lm_init(Rng::Derive(seed, 3).NextU64());
  nn::Initializer lora_init(Rng::Derive(seed, 4).NextU64());

  const auto& enc = manifest.encoder;
  if (enc.kind == "tone_frame") {
    frame_encoder_.emplace(enc.frame, enc_init);
  } else if (enc.kind == "tone_sequence") {
    sequence_encoder_.emplace(SequenceEncoderConfig{enc.frame, enc.output_dim}, enc_init);
  }

  const int lm_width = manifest.lm.config.embed_dim;
  const auto& p = manifest.projector;
  if (p.kind == "linear") {
    linear_.emplace(LinearProjectorConfig{encoder_width(), p.downsample_factor, p.hidden_dim,
                                          lm_width},
                    proj_init);
    if (linear_->config().output_dim != lm_width) {
      throw Error(ErrorKind::kAssembly, "projector output width " +
                                            std::to_string(linear_->config().output_dim) +
                                            " != LM embedding width " + std::to_string(lm_width));
    }
  } else {
    qformer_.emplace(QFormerConfig{encoder_width(), lm_width, p.query_count, p.layers, p.heads},
                     proj_init);
  }
  lm_ = ToyLM(manifest.lm.config, lm_init);
  if (manifest.peft) lm_.AttachLora(*manifest.peft, lora_init);
}

int AssembledModel::encoder_width() const {
  if (frame_encoder_) return frame_encoder_->output_dim();
  if (sequence_encoder_) return sequence_encoder_->output_dim();
  return manifest_.encoder.frame.input_dim;
}

bool AssembledModel::has_encoder_params() const {
  return frame_encoder_.has_value() || sequence_encoder_.has_value();
}

ad::Var AssembledModel::Encode(const ad::Var& features, const nn::RunContext& ctx) const {
  if (frame_encoder_) return frame_encoder_->Forward(features, ctx);
  if (sequence_encoder_) return sequence_encoder_->Forward(features, ctx);
  if (features.cols() != manifest_.encoder.frame.input_dim) {
    throw Error(ErrorKind::kShape, "identity encoder expects width " +
                                       std::to_string(manifest_.encoder.frame.input_dim) +
                                       ", got " + std::to_string(features.cols()));
  }
  return features;
}

ad::Var AssembledModel::Project(const ad::Var& encoded, const nn::RunContext& ctx) const {
  if (linear_) return linear_->Forward(encoded, ctx);
  return qformer_->Forward(encoded, ctx);
}

std::optional<double> AssembledModel::PrefixRate(double feature_rate_hz) const {
  if (!linear_) return std::nullopt;
  // Sequence encoders emit a single vector; it has no frame rate to divide.
  if (sequence_encoder_) return std::nullopt;
  return feature_rate_hz / linear_->config().downsample_factor;
}

EmbedSeq AssembledModel::AudioPrefix(const FeatureSeq& features) const {
  EmbedSeq out;
  out.embeddings = Project(Encode(ad::Constant(features.frames), {}), {}).value();
  out.frame_rate_hz = PrefixRate(features.frame_rate_hz);
  return out;
}

nn::ParamList AssembledModel::Parameters() const {
  nn::ParamList out;
  if (frame_encoder_) frame_encoder_->Collect("encoder", out);
  if (sequence_encoder_) sequence_encoder_->Collect("encoder", out);
  if (linear_) linear_->Collect("projector", out);
  if (qformer_) qformer_->Collect("projector", out);
  lm_.Collect("lm", out);
  return out;
}

nn::ParamList AssembledModel::ComponentParameters(const std::string& component) const {
  nn::ParamList out;
  for (const auto& p : Parameters()) {
    if (ComponentOf(p.name) == component) out.push_back(p);
  }
  return out;
}

nn::ParamList AssembledModel::TrainableParameters() const {
  nn::ParamList out;
  for (const auto& p : Parameters()) {
    if (p.var.requires_grad()) out.push_back(p);
  }
  return out;
}

std::set<std::string> AssembledModel::TrainableNames() const {
  std::set<std::string> out;
  for (const auto& p : TrainableParameters()) out.insert(p.name);
  return out;
}

std::string ComponentOf(const std::string& name) {
  if (name.find(".lora_") != std::string::npos) return "lora";
  return name.substr(0, name.find('.'));
}

std::set<std::string> SelectParameterNames(const AssembledModel& model,
                                           const std::set<std::string>& selectors) {
  const nn::ParamList params = model.Parameters();
  auto matches = [](const std::string& name, const std::string& entry) {
    const std::string comp = ComponentOf(name);
    if (entry.find('.') == std::string::npos) return comp == entry;
    // Dotted prefixes select within their own component only, so
    // "lm.blocks.0" does not pull in that block's LoRA factors.
    const bool prefix = name == entry || name.rfind(entry + ".", 0) == 0;
    return prefix && comp == ComponentOf(entry + ".x");
  };
  std::set<std::string> out;
  for (const auto& entry : selectors) {
    const std::string root = entry.substr(0, entry.find('.'));
    if (!kComponents.contains(root)) {
      throw Error(ErrorKind::kPolicy, "unknown component '" + entry + "'");
    }
    bool any = false;
    for (const auto& p : params) {
      if (matches(p.name, entry)) {
        out.insert(p.name);
        any = true;
      }
    }
    if (!any) {
      throw Error(ErrorKind::kPolicy, "component '" + entry + "' has no parameters in this model");
    }
  }
  return out;
}

std::set<std::string> AssetSelectors(const AssemblyManifest& manifest) {
  std::set<std::string> out = manifest.train.trainable;
  for (const auto& s : manifest.train.stages) out.insert(s.trainable.begin(), s.trainable.end());
  return out;
}

void ApplyTrainPolicy(AssembledModel& model, const std::set<std::string>& trainable) {
  const std::set<std::string> names = SelectParameterNames(model, trainable);
  for (const auto& p : model.Parameters()) p.var.node()->requires_grad = names.contains(p.name);
}

std::unique_ptr<AssembledModel> BuildModel(const AssemblyManifest& manifest) {
  auto model = std::make_unique<AssembledModel>(manifest);
  if (!manifest.encoder.zoo.empty()) {
    LoadBaseWeights(model->ComponentParameters("encoder"),
                    ReadBundle(manifest.Resolve(manifest.encoder.zoo)), "encoder");
  }
  if (!manifest.lm.zoo.empty()) {
    LoadBaseWeights(model->ComponentParameters("lm"),
                    ReadBundle(manifest.Resolve(manifest.lm.zoo)), "lm");
  }
  ApplyTrainPolicy(*model, manifest.train.trainable);
  return model;
}

// --- asset bundles ---

namespace {

constexpr char kMagic[4] = {'S', 'L', 'M', 'A'};
constexpr std::uint16_t kVersion = 1;

void PutLe16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

void PutLe32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t GetLe32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  }
  return v;
}

std::int64_t ShapeProduct(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

}  // namespace

std::string AssetBundle::Serialize() const {
  ordered_json header;
  header["manifest_digest"] = manifest_digest;
  ordered_json list = ordered_json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    if (static_cast<std::int64_t>(e.data.size()) != ShapeProduct(e.shape)) {
      throw Error(ErrorKind::kFormat, "entry " + e.name + " payload does not match its shape");
    }
    ordered_json ej;
    ej["name"] = e.name;
    ej["shape"] = e.shape;
    ej["byte_offset"] = offset;
    list.push_back(ej);
    offset += 4 * e.data.size();
  }
  header["entries"] = list;
  header["vocab"] = vocab;
  if (!meta.is_null()) header["meta"] = meta;
  const std::string hdr = header.dump();

  std::string out(kMagic, 4);
  PutLe16(out, kVersion);
  PutLe32(out, static_cast<std::uint32_t>(hdr.size()));
  out += hdr;
  out.reserve(out.size() + offset);
  for (const auto& e : entries) {
    for (float f : e.data) PutLe32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

AssetBundle AssetBundle::Deserialize(const std::string& bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::kFormat, "not an SLMA asset bundle");
  }
  const std::uint16_t version = static_cast<std::uint16_t>(
      static_cast<unsigned char>(bytes[4]) | (static_cast<unsigned char>(bytes[5]) << 8));
  if (version != kVersion) {
    throw Error(ErrorKind::kFormat, "unsupported SLMA version " + std::to_string(version));
  }
  const std::uint32_t hlen = GetLe32(bytes, 6);
  if (10 + static_cast<std::size_t>(hlen) > bytes.size()) {
    throw Error(ErrorKind::kFormat, "truncated SLMA header");
  }
  json header;
  try {
    header = json::parse(bytes.substr(10, hlen));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("bad SLMA header: ") + e.what());
  }
  const std::size_t payload = 10 + hlen;
  AssetBundle b;
  b.manifest_digest = header.at("manifest_digest").get<std::string>();
  if (header.contains("vocab")) b.vocab = header["vocab"].get<std::vector<std::string>>();
  if (header.contains("meta")) b.meta = header["meta"];
  for (const auto& ej : header.at("entries")) {
    AssetEntry e;
    e.name = ej.at("name").get<std::string>();
    e.shape = ej.at("shape").get<std::vector<std::int64_t>>();
    const std::uint64_t off = ej.at("byte_offset").get<std::uint64_t>();
    const std::int64_t n = ShapeProduct(e.shape);
    if (payload + off + 4 * static_cast<std::uint64_t>(n) > bytes.size()) {
      throw Error(ErrorKind::kFormat, "payload of " + e.name + " runs past end of file");
    }
    e.data.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      e.data[static_cast<std::size_t>(i)] =
          std::bit_cast<float>(GetLe32(bytes, payload + off + 4 * static_cast<std::size_t>(i)));
    }
    b.entries.push_back(std::move(e));
  }
  return b;
}

AssetBundle MakeBundle(const AssemblyManifest& manifest, const nn::ParamList& params,
                       const std::vector<std::string>& vocab) {
  AssetBundle b;
  b.manifest_digest = ManifestDigest(manifest);
  b.vocab = vocab;
  for (const auto& p : params) {
    AssetEntry e;
    e.name = p.name;
    e.shape = {p.var.rows(), p.var.cols()};
    const Mat& v = p.var.value();
    e.data.resize(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      e.data[static_cast<std::size_t>(i)] = static_cast<float>(v.data()[i]);
    }
    b.entries.push_back(std::move(e));
  }
  return b;
}

void WriteBundle(const std::filesystem::path& path, const AssetBundle& bundle) {
  const std::string bytes = bundle.Serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

AssetBundle ReadBundle(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return AssetBundle::Deserialize(ss.str());
}

AssetBundle SaveAssets(const AssembledModel& model, const std::filesystem::path& path) {
  const nn::ParamList params = model.TrainableParameters();
  if (params.empty()) {
    throw Error(ErrorKind::kContract, "no trainable parameters to save");
  }
  AssetBundle b = MakeBundle(model.manifest(), params, model.tokenizer().Table());
  WriteBundle(path, b);
  return b;
}

namespace {

void CopyEntry(const AssetEntry& e, const nn::NamedParam& p) {
  if (e.shape.size() != 2 || e.shape[0] != p.var.rows() || e.shape[1] != p.var.cols()) {
    std::string got;
    for (auto d : e.shape) got += (got.empty() ? "" : "x") + std::to_string(d);
    throw Error(ErrorKind::kShape, "parameter " + e.name + " expects " +
                                       std::to_string(p.var.rows()) + "x" +
                                       std::to_string(p.var.cols()) + ", bundle has " + got);
  }
  Mat& v = p.var.node()->value;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    v.data()[i] = static_cast<double>(e.data[static_cast<std::size_t>(i)]);
  }
}

}  // namespace

void LoadAssets(AssembledModel& model, const AssetBundle& bundle) {
  const std::string expected = ManifestDigest(model.manifest());
  if (bundle.manifest_digest != expected) {
    throw Error(ErrorKind::kDigestMismatch, "bundle digest " + bundle.manifest_digest +
                                                " does not match model manifest digest " +
                                                expected);
  }
  std::map<std::string, nn::NamedParam> by_name;
  for (const auto& p : model.Parameters()) by_name.emplace(p.name, p);
  // A bundle must cover the model's tuned set exactly.
  std::set<std::string> present;
  for (const auto& e : bundle.entries) present.insert(e.name);
  std::string missing;
  for (const auto& name : SelectParameterNames(model, AssetSelectors(model.manifest()))) {
    if (!present.contains(name)) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) {
    throw Error(ErrorKind::kMissingParameter, "bundle lacks parameter(s): " + missing);
  }
  for (const auto& e : bundle.entries) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      throw Error(ErrorKind::kMissingParameter, "model has no parameter named " + e.name);
    }
    CopyEntry(e, it->second);
  }
}

void LoadBaseWeights(const nn::ParamList& params, const AssetBundle& bundle) {
  std::map<std::string, nn::NamedParam> by_name;
  for (const auto& p : params) by_name.emplace(p.name, p);
  for (const auto& e : bundle.entries) {
    auto it = by_name.find(e.name);
    if (it == by_name.end()) {
      throw Error(ErrorKind::kMissingParameter, "base weights name unknown parameter " + e.name);
    }
    CopyEntry(e, it->second);
  }
}

void LoadBaseWeights(const nn::ParamList& params, const AssetBundle& bundle,
                     const std::string& component) {
  AssetBundle part;
  for (const auto& e : bundle.entries) {
    if (ComponentOf(e.name) == component) part.entries.push_back(e);
  }
  if (part.entries.empty()) {
    throw Error(ErrorKind::kMissingParameter, "weights bundle has no " + component + " entries");
  }
  LoadBaseWeights(params, part);
}

}  // namespace slam_micro
