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

#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "slam_micro/aligner.hpp"
#include "slam_micro/assembly.hpp"
#include "slam_micro/decoding.hpp"
#include "slam_micro/errors.hpp"
#include "slam_micro/metrics.hpp"
#include "slam_micro/recipes.hpp"
#include "slam_micro/synth_corpus.hpp"
#include "slam_micro/trainer.hpp"
#include "slam_micro/zoo.hpp"

namespace slam_micro::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

// Semantic usage errors detected after flag parsing (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> EnvSeed() {
  const char* s = std::getenv("SLAM_MICRO_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') throw UsageError(std::string("SLAM_MICRO_SEED is not an integer: ") + s);
  return v;
}

// --seed, then SLAM_MICRO_SEED, then the fallback.
std::uint64_t ResolveSeed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback) {
  if (flag) return *flag;
  if (auto env = EnvSeed()) return *env;
  return fallback;
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> ReadJsonl(const fs::path& path) {
  std::vector<json> rows;
  std::istringstream in(ReadText(path));
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kFormat, path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return rows;
}

std::string RecordId(const DatasetRecord& r) { return fs::path(r.audio).filename().string(); }

std::vector<std::string> UniqueCaptions(const DatasetManifest& m) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    if (seen.insert(r.text).second) out.push_back(r.text);
  }
  return out;
}

// --- decoding shared by train (eval split) and infer ---

struct DecodeSetup {
  std::string decoder = "greedy";
  int width = 4;
  std::vector<int> widths = {2, 3, 4, 5};
  int max_len = 96;
  const DualEncoder* aligner = nullptr;
  const Datastore* datastore = nullptr;
};

ordered_json DecodeRecord(const AssembledModel& model, const DatasetRecord& rec,
                          const TemplateSet& templates, const DecodeSetup& setup) {
  const std::string& task = model.manifest().task;
  const FeatureSeq features = LogMel(ReadWav(rec.audio));
  Mat prefix;
  TokenSeq prompt;
  if (task == "caption") {
    CaptionOptions co;
    const CaptionInputs in =
        PrepareCaption(features, *setup.aligner, *setup.datastore, model, templates, co);
    prefix = in.prefix;
    prompt = in.prompt;
  } else {
    prefix = model.AudioPrefix(features).embeddings;
    prompt = model.tokenizer().Encode(RecordPrompt(task, rec, templates));
  }
  const ToyLM& lm = model.lm();
  const int eos = lm.config().eos_id;
  ordered_json row;
  row["id"] = RecordId(rec);
  ordered_json cands = ordered_json::array();
  if (setup.decoder == "clap-refine") {
    RefineOptions ro;
    ro.widths = setup.widths;
    ro.max_len = setup.max_len;
    const RefineResult r = ClapRefine(lm, prefix, prompt, features, *setup.aligner, ro);
    row["text"] = r.text;
    for (const auto& c : r.candidates) {
      cands.push_back({{"text", c.text}, {"logp", c.logp}, {"width", c.width},
                       {"align_score", c.align_score}});
    }
  } else {
    std::vector<Hypothesis> hyps;
    if (setup.decoder == "beam") {
      hyps = BeamSearch(lm, prefix, prompt, setup.width, setup.max_len);
    } else {
      hyps.push_back(Greedy(lm, prefix, prompt, setup.max_len));
    }
    row["text"] = HypothesisText(model.tokenizer(), hyps.front(), eos);
    for (const auto& h : hyps) {
      ordered_json c = {{"text", HypothesisText(model.tokenizer(), h, eos)},
                        {"logp", h.logp},
                        {"width", h.beam_width},
                        {"align_score", nullptr}};
      if (setup.aligner != nullptr) {
        try {
          c["align_score"] =
              Similarity(setup.aligner->EmbedAudio(features), setup.aligner->EmbedText(c["text"].get<std::string>()));
        } catch (const Error&) {
        }
      }
      cands.push_back(std::move(c));
    }
  }
  row["candidates"] = cands;
  return row;
}

std::string DecodeManifest(const AssembledModel& model, const DatasetManifest& m,
                           const TemplateSet& templates, const DecodeSetup& setup) {
  std::string out;
  for (const auto& rec : m.records) out += DecodeRecord(model, rec, templates, setup).dump() + "\n";
  return out;
}

// --- evaluation ---

struct Scored {
  std::string ref;
  std::string hyp;
};

// SRT records compare the transcript part for WER-style metrics and the
// translation part for BLEU.
Scored SplitForMetric(const DatasetRecord& rec, const std::string& hyp, bool translation) {
  if (!rec.translation) return {rec.text, hyp};
  const std::string tag = rec.lang_tag.value_or("<|de|>");
  std::string transcript = hyp;
  std::string translated;
  if (const auto at = hyp.find(tag); at != std::string::npos) {
    transcript = hyp.substr(0, at);
    translated = hyp.substr(at + tag.size());
  }
  return translation ? Scored{*rec.translation, translated} : Scored{rec.text, transcript};
}

json OptionalNumber(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

ordered_json Evaluate(const DatasetManifest& refs, const std::map<std::string, std::string>& hyps,
                      const std::string& metric,
                      const std::map<std::string, std::vector<std::string>>* lists) {
  ordered_json report;
  report["metric"] = metric;
  ordered_json utts = ordered_json::array();
  std::vector<WerResult> wers;
  std::vector<BiasedWerResult> biased;
  std::vector<std::vector<std::string>> bleu_refs;
  std::vector<std::string> bleu_hyps;
  long mer_errors = 0;
  long mer_tokens = 0;
  for (const auto& rec : refs.records) {
    const std::string id = RecordId(rec);
    auto it = hyps.find(id);
    if (it == hyps.end()) throw Error(ErrorKind::kContract, "no hypothesis for '" + id + "'");
    const Scored s = SplitForMetric(rec, it->second, metric == "bleu");
    ordered_json u;
    u["id"] = id;
    if (metric == "wer") {
      const WerResult w = Wer(s.ref, s.hyp);
      u["wer"] = w.rate;
      u["substitutions"] = w.substitutions;
      u["deletions"] = w.deletions;
      u["insertions"] = w.insertions;
      wers.push_back(w);
    } else if (metric == "bwer") {
      auto l = lists->find(id);
      if (l == lists->end()) throw Error(ErrorKind::kContract, "no biasing list for '" + id + "'");
      const BiasedWerResult b =
          BiasedWer(s.ref, s.hyp, std::set<std::string>(l->second.begin(), l->second.end()));
      u["b_wer"] = OptionalNumber(b.b_wer);
      u["u_wer"] = OptionalNumber(b.u_wer);
      u["recall"] = OptionalNumber(b.recall);
      u["wer"] = Wer(s.ref, s.hyp).rate;
      wers.push_back(Wer(s.ref, s.hyp));
      biased.push_back(b);
    } else if (metric == "mer") {
      const std::vector<std::string> rt = MixedTokens(s.ref);
      const WerResult w = TokenErrorRate(rt, MixedTokens(s.hyp));
      u["mer"] = w.rate;
      mer_errors += w.errors();
      mer_tokens += w.ref_words;
    } else {
      bleu_refs.push_back({s.ref});
      bleu_hyps.push_back(s.hyp);
    }
    if (metric != "bleu") utts.push_back(std::move(u));
  }
  ordered_json corpus;
  if (metric == "wer" || metric == "bwer") {
    const CorpusWer c = AggregateWer(wers);
    corpus["wer"] = c.rate;
    corpus["errors"] = c.errors;
    corpus["ref_words"] = c.ref_words;
  }
  if (metric == "bwer") {
    const CorpusBiasedWer c = AggregateBiasedWer(biased);
    corpus["b_wer"] = OptionalNumber(c.b_wer);
    corpus["u_wer"] = OptionalNumber(c.u_wer);
    corpus["recall"] = OptionalNumber(c.recall);
  }
  if (metric == "mer") {
    corpus["mer"] = mer_tokens ? static_cast<double>(mer_errors) / mer_tokens : 0.0;
    corpus["errors"] = mer_errors;
    corpus["ref_tokens"] = mer_tokens;
  }
  if (metric == "bleu") {
    const BleuResult b = Bleu(bleu_refs, bleu_hyps);
    corpus["bleu"] = b.score;
    corpus["precisions"] = b.precisions;
    corpus["brevity_penalty"] = b.brevity_penalty;
    if (!b.warning.empty()) corpus["warning"] = b.warning;
  }
  report["corpus"] = corpus;
  if (metric != "bleu") report["utterances"] = utts;
  return report;
}

std::map<std::string, std::string> HypsById(const fs::path& path) {
  std::map<std::string, std::string> out;
  for (const auto& row : ReadJsonl(path)) {
    if (!row.contains("id") || !row.contains("text")) {
      throw Error(ErrorKind::kFormat, path.string() + ": hypothesis rows need id and text");
    }
    out[row.at("id").get<std::string>()] = row.at("text").get<std::string>();
  }
  return out;
}

std::string DefaultMetric(const std::string& task) {
  if (task == "casr") return "bwer";
  return "wer";
}

std::map<std::string, std::vector<std::string>> KeywordLists(const DatasetManifest& m) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto& r : m.records) out[RecordId(r)] = r.keywords.value_or(std::vector<std::string>{});
  return out;
}

// --- commands ---

struct SynthArgs {
  std::string task;
  int n = 64;
  std::optional<std::uint64_t> seed;
  std::string out;
  double snr_db = 30.0;
  std::string split = "train";
};

int CmdSynth(const SynthArgs& a, std::ostream& out) {
  CorpusSpec spec;
  spec.task = ParseCorpusTask(a.task);
  spec.n_utts = a.n;
  spec.seed = ResolveSeed(a.seed, 0);
  spec.snr_db = a.snr_db;
  spec.split = a.split;
  const DatasetManifest m = MakeCorpus(spec, a.out);
  out << "wrote " << m.records.size() << " " << a.task << " utterances to " << a.out << "\n";
  return kExitOk;
}

struct ZooArgs {
  std::string out;
  std::optional<std::uint64_t> seed;
  int lm_steps = ZooOptions{}.lm_steps;
  int encoder_steps = ZooOptions{}.encoder_steps;
};

int CmdZoo(const ZooArgs& a, std::ostream& out, std::ostream& err) {
  ZooOptions o;
  o.seed = ResolveSeed(a.seed, o.seed);
  o.lm_steps = a.lm_steps;
  o.encoder_steps = a.encoder_steps;
  o.on_step = [&](const std::string& phase, int step, double loss) {
    if ((step + 1) % 250 == 0) err << phase << " step " << step + 1 << " loss " << loss << "\n";
  };
  WriteBundle(a.out, PretrainZoo(o));
  out << "wrote base weights to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string aligner;
  std::string out;
};

int CmdTrain(const TrainArgs& a, std::ostream& out) {
  AssemblyManifest m = ParseConfigFile(a.config);
  m.seed = ResolveSeed(a.seed, m.seed);
  if (!a.out.empty()) m.output_dir = fs::absolute(a.out).string();
  m.AbsolutizePaths();
  if (m.task == "caption" && a.aligner.empty()) {
    throw UsageError("caption training needs --aligner");
  }
  if (m.data_train.empty()) throw Error(ErrorKind::kContract, "config has no data.train manifest");
  const fs::path run = m.output_dir;
  fs::create_directories(run);

  auto model = BuildModel(m);
  const TemplateSet templates = TemplateSet::Default();
  const DatasetManifest train_set = ReadManifest(m.data_train);
  std::optional<DualEncoder> aligner;
  std::optional<Datastore> ds;
  std::vector<TrainExample> examples;
  if (m.task == "caption") {
    aligner = LoadAligner(a.aligner);
    ds = BuildDatastore(*aligner, UniqueCaptions(train_set));
    CaptionTextOptions co;
    co.seed = m.seed;
    examples = CaptionTextExamples(*aligner, *ds, templates, co);
    SaveDatastore(*ds, run / "datastore");
  } else {
    examples = ExamplesFromDataset(*model, train_set, templates);
  }
  std::ostringstream log;
  const TrainReport report = Train(*model, examples, m.train.stages, m.seed,
                                   {[&](int step, double loss) {
                                     log << "step " << step << " loss " << loss << "\n";
                                   }});
  log << "seconds " << report.seconds << "\n";
  WriteText(run / "config.yaml", ManifestToYaml(m));
  SaveTrainedAssets(*model, run / "assets.slma");
  WriteText(run / "report.json", report.ToJson(false).dump(2) + "\n");
  WriteText(run / "train.log", log.str());
  out << "trained " << report.losses.size() << " steps, final loss " << report.losses.back()
      << "\n";

  if (!m.data_eval.empty()) {
    const DatasetManifest eval_set = ReadManifest(m.data_eval);
    DecodeSetup setup;
    if (aligner) setup.aligner = &*aligner;
    if (ds) setup.datastore = &*ds;
    const std::string hyps = DecodeManifest(*model, eval_set, templates, setup);
    WriteText(run / "hyps.jsonl", hyps);
    const std::string metric = DefaultMetric(m.task);
    const auto lists = KeywordLists(eval_set);
    const ordered_json report_eval =
        Evaluate(eval_set, HypsById(run / "hyps.jsonl"), metric, &lists);
    WriteText(run / "eval.json", report_eval.dump(2) + "\n");
    out << "eval " << metric << " " << report_eval["corpus"].dump() << "\n";
  }
  out << "run directory " << run.string() << "\n";
  return kExitOk;
}

struct InferArgs {
  std::string config;
  std::string assets;
  std::string manifest;
  std::string decoder = "greedy";
  std::string aligner;
  std::string datastore;
  int width = 4;
  std::vector<int> widths = {2, 3, 4, 5};
  int max_len = 96;
  std::string out;
};

int CmdInfer(const InferArgs& a, std::ostream& out) {
  if (a.decoder == "clap-refine" && a.aligner.empty()) {
    throw UsageError("--decoder clap-refine requires --aligner");
  }
  const AssemblyManifest m = ParseConfigFile(a.config);
  if (m.task == "caption" && (a.aligner.empty() || a.datastore.empty())) {
    throw UsageError("caption inference requires --aligner and --datastore");
  }
  auto model = BuildModel(m);
  LoadAssets(*model, ReadBundle(a.assets));
  std::optional<DualEncoder> aligner;
  std::optional<Datastore> ds;
  DecodeSetup setup;
  setup.decoder = a.decoder;
  setup.width = a.width;
  setup.widths = a.widths;
  setup.max_len = a.max_len;
  if (!a.aligner.empty()) setup.aligner = &aligner.emplace(LoadAligner(a.aligner));
  if (!a.datastore.empty()) setup.datastore = &ds.emplace(LoadDatastore(a.datastore));
  const std::string jsonl =
      DecodeManifest(*model, ReadManifest(a.manifest), TemplateSet::Default(), setup);
  if (a.out.empty()) {
    out << jsonl;
  } else {
    WriteText(a.out, jsonl);
  }
  return kExitOk;
}

struct EvalArgs {
  std::string refs;
  std::string hyps;
  std::string metric;
  std::string biasing_lists;
  std::string out;
};

int CmdEval(const EvalArgs& a, std::ostream& out) {
  if (a.metric == "bwer" && a.biasing_lists.empty()) {
    throw UsageError("--metric bwer requires --biasing-lists");
  }
  std::map<std::string, std::vector<std::string>> lists;
  if (!a.biasing_lists.empty()) {
    for (const auto& row : ReadJsonl(a.biasing_lists)) {
      lists[row.at("id").get<std::string>()] = row.at("words").get<std::vector<std::string>>();
    }
  }
  const ordered_json report = Evaluate(ReadManifest(a.refs), HypsById(a.hyps), a.metric, &lists);
  const std::string text = report.dump(2) + "\n";
  if (a.out.empty()) {
    out << text;
  } else {
    WriteText(a.out, text);
    out << report["corpus"].dump() << "\n";
  }
  return kExitOk;
}

struct AlignArgs {
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  int steps = AlignerTrainOptions{}.steps;
  int batch_size = AlignerTrainOptions{}.batch_size;
};

int CmdAlign(const AlignArgs& a, std::ostream& out) {
  const DatasetManifest m = ReadManifest(a.manifest);
  std::vector<std::pair<FeatureSeq, std::string>> pairs;
  for (const auto& r : m.records) pairs.emplace_back(LogMel(ReadWav(r.audio)), r.text);
  const std::uint64_t seed = ResolveSeed(a.seed, 0);
  DualEncoder model(AlignerConfig{}, seed);
  AlignerTrainOptions o;
  o.steps = a.steps;
  o.batch_size = a.batch_size;
  o.seed = seed;
  const AlignerTrainReport rep = TrainAligner(model, pairs, o);
  SaveAligner(model, a.out);
  out << "aligner trained " << rep.losses.size() << " steps, final loss " << rep.losses.back()
      << "\n";
  return kExitOk;
}

struct DatastoreArgs {
  std::string aligner;
  std::string captions;
  std::string out;
};

int CmdDatastore(const DatastoreArgs& a, std::ostream& out) {
  const DualEncoder model = LoadAligner(a.aligner);
  const Datastore ds = BuildDatastore(model, UniqueCaptions(ReadManifest(a.captions)));
  SaveDatastore(ds, a.out);
  out << "datastore with " << ds.size() << " captions written to " << a.out << "\n";
  return kExitOk;
}

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"slam-micro: encoder-projector-LM toolkit on synthetic audio"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "write a synthetic corpus");
  synth->add_option("--task", sa.task, "asr | casr | srt | caption")
      ->required()
      ->check(CLI::IsMember({"asr", "casr", "srt", "caption"}));
  synth->add_option("--n", sa.n, "number of utterances")->check(CLI::PositiveNumber);
  synth->add_option("--seed", sa.seed, "random seed");
  synth->add_option("--out", sa.out, "output directory")->required();
  synth->add_option("--snr", sa.snr_db, "noise level in dB");
  synth->add_option("--split", sa.split, "split name recorded in the manifest");

  ZooArgs za;
  auto* zoo = app.add_subcommand("zoo", "pretrain base encoder and LM weights");
  zoo->add_option("--out", za.out, "output bundle")->required();
  zoo->add_option("--seed", za.seed, "random seed");
  zoo->add_option("--lm-steps", za.lm_steps)->check(CLI::NonNegativeNumber);
  zoo->add_option("--encoder-steps", za.encoder_steps)->check(CLI::NonNegativeNumber);

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "train a model from a YAML config");
  train->add_option("--config", ta.config, "YAML config")->required();
  train->add_option("--seed", ta.seed, "random seed (overrides the config)");
  train->add_option("--aligner", ta.aligner, "aligner bundle (caption task)");
  train->add_option("--out", ta.out, "run directory (overrides train.output_dir)");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "decode a manifest with trained assets");
  infer->add_option("--config", ia.config)->required();
  infer->add_option("--assets", ia.assets)->required();
  infer->add_option("--manifest", ia.manifest)->required();
  infer->add_option("--decoder", ia.decoder)
      ->check(CLI::IsMember({"greedy", "beam", "clap-refine"}));
  infer->add_option("--aligner", ia.aligner, "aligner bundle");
  infer->add_option("--datastore", ia.datastore, "caption datastore directory");
  infer->add_option("--width", ia.width, "beam width")->check(CLI::PositiveNumber);
  infer->add_option("--widths", ia.widths, "CLAP-Refine beam widths")->delimiter(',');
  infer->add_option("--max-len", ia.max_len)->check(CLI::PositiveNumber);
  infer->add_option("--out", ia.out, "JSONL output (stdout if absent)");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "score hypotheses against references");
  eval->add_option("--refs", ea.refs, "reference manifest")->required();
  eval->add_option("--hyps", ea.hyps, "hypothesis JSONL")->required();
  eval->add_option("--metric", ea.metric)
      ->required()
      ->check(CLI::IsMember({"wer", "bwer", "mer", "bleu"}));
  eval->add_option("--biasing-lists", ea.biasing_lists, "JSONL rows {id, words}");
  eval->add_option("--out", ea.out, "report path (stdout if absent)");

  AlignArgs aa;
  auto* align = app.add_subcommand("align", "train the contrastive audio-text aligner");
  align->add_option("--manifest", aa.manifest)->required();
  align->add_option("--out", aa.out)->required();
  align->add_option("--seed", aa.seed);
  align->add_option("--steps", aa.steps)->check(CLI::PositiveNumber);
  align->add_option("--batch-size", aa.batch_size)->check(CLI::PositiveNumber);

  DatastoreArgs da;
  auto* datastore = app.add_subcommand("datastore", "embed captions into a datastore");
  datastore->add_option("--aligner", da.aligner)->required();
  datastore->add_option("--captions", da.captions, "manifest whose texts are the captions")
      ->required();
  datastore->add_option("--out", da.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    CLI::App* sub = nullptr;
    for (auto* s : app.get_subcommands()) sub = s;
    err << (sub ? sub->help() : app.help());
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return CmdSynth(sa, out);
    if (zoo->parsed()) return CmdZoo(za, out, err);
    if (train->parsed()) return CmdTrain(ta, out);
    if (infer->parsed()) return CmdInfer(ia, out);
    if (eval->parsed()) return CmdEval(ea, out);
    if (align->parsed()) return CmdAlign(aa, out);
    if (datastore->parsed()) return CmdDatastore(da, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error [" << ErrorKindName(e.kind()) << "]: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace slam_micro::cli
