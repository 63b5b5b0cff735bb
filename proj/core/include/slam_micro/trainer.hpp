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

// Staged training under freeze policies, the task-specific example
// builders, and a finite-difference gradient check.

#ifndef SLAM_MICRO_TRAINER_HPP_
#define SLAM_MICRO_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "slam_micro/aligner.hpp"
#include "slam_micro/assembly.hpp"
#include "slam_micro/recipes.hpp"
#include "slam_micro/synth_corpus.hpp"

namespace slam_micro {

struct TrainExample {
  std::string id;
  FeatureSeq features;
  TokenSeq prompt;
  TokenSeq target;
};

// Prompt text for a record under the given task (asr, casr, srt, caption).
std::string RecordPrompt(const std::string& task, const DatasetRecord& record,
                         const TemplateSet& templates);
// Target text: the transcript, or the SRT layout for srt records.
std::string RecordTarget(const std::string& task, const DatasetRecord& record);

// Reads every record's audio and builds examples for model.manifest().task.
// The caption task has no audio-side training data; see CaptionTextExamples.
std::vector<TrainExample> ExamplesFromDataset(const AssembledModel& model,
                                              const DatasetManifest& data,
                                              const TemplateSet& templates);

struct CaptionTextOptions {
  std::size_t k = 3;
  int copies = 4;            // noisy copies per caption
  double noise_std = 0.05;   // per-dimension, before renormalization
  std::uint64_t seed = 0;
};

// Text-only caption training: each caption's text-branch embedding is the
// one-row input, the prompt lists its k nearest other captions.
std::vector<TrainExample> CaptionTextExamples(const DualEncoder& aligner, const Datastore& ds,
                                              const TemplateSet& templates,
                                              const CaptionTextOptions& options);

struct StageReport {
  std::string name;
  int first_step = 0;
  int steps = 0;
  double lr = 0.0;
  int batch_size = 0;
  std::vector<std::string> trainable;
  double final_loss = 0.0;
};

struct TrainReport {
  std::vector<double> losses;  // mean token loss per step
  std::vector<StageReport> stages;
  double seconds = 0.0;
  std::map<std::string, long> update_counts;  // per component

  // Wall-clock time is optional so the report can stay byte-reproducible.
  nlohmann::ordered_json ToJson(bool with_timing = true) const;
};

struct TrainOptions {
  std::function<void(int step, double loss)> on_step;
};

// Runs the stages in order. Each stage applies its trainable set, then takes
// `steps` Adam steps over batches drawn from a seeded per-epoch shuffle.
// Throws kPolicy when a stage selects nothing and kNumeric on a non-finite
// loss. Leaves the model with the last stage's policy applied.
TrainReport Train(AssembledModel& model, const std::vector<TrainExample>& data,
                  const std::vector<StageSpec>& schedule, std::uint64_t seed,
                  const TrainOptions& options = {});

// Flags the union of all stages' trainable sets and writes them as assets.
AssetBundle SaveTrainedAssets(AssembledModel& model, const std::filesystem::path& path);

// Mean target loss of one example with dropout disabled.
double ExampleLoss(const AssembledModel& model, const TrainExample& example);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<std::string> sampled;  // "name[index]" per scalar
};

// Central differences (step h) on sample_size trainable scalars drawn with
// the seed, against the analytic gradient of ExampleLoss. nullopt when
// nothing is trainable. Relative error is |a - n| / max(|a|, |n|, floor).
std::optional<GradCheckResult> FiniteDifferenceCheck(const AssembledModel& model,
                                                     const TrainExample& example,
                                                     std::size_t sample_size, std::uint64_t seed,
                                                     double h = 1e-5, double floor = 1e-6);

}  // namespace slam_micro

#endif  // SLAM_MICRO_TRAINER_HPP_
