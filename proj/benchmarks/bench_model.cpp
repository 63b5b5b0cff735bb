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

#include <benchmark/benchmark.h>

#include "slam_micro/assembly.hpp"
#include "slam_micro/decoding.hpp"
#include "slam_micro/synth_corpus.hpp"
#include "slam_micro/trainer.hpp"

namespace slam_micro {
namespace {

const char* kConfig = R"(
encoder: {kind: tone_frame}
projector: {kind: linear}
lm: {preset: tiny}
peft: {rank: 8, alpha: 16}
train: {seed: 1}
)";

FeatureSeq Features(int symbols) {
  return LogMel(SynthUtterance(std::string(static_cast<std::size_t>(symbols), 'm'), ToneSpec{}, 7));
}

void BM_AudioPrefix(benchmark::State& state) {
  const auto model = BuildModel(ParseConfig(kConfig));
  const FeatureSeq f = Features(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(model->AudioPrefix(f));
  state.counters["frames"] = static_cast<double>(f.length());
}

BENCHMARK(BM_AudioPrefix)->Arg(20)->Arg(60);

void BM_Greedy(benchmark::State& state) {
  const auto model = BuildModel(ParseConfig(kConfig));
  const Mat prefix = model->AudioPrefix(Features(40)).embeddings;
  const TokenSeq prompt = {Tokenizer::kTagEn};
  const int len = static_cast<int>(state.range(0));
  for (auto _ : state) {
    // Random weights rarely emit EOS early, so this decodes ~len tokens.
    benchmark::DoNotOptimize(Greedy(model->lm(), prefix, prompt, len));
  }
}

BENCHMARK(BM_Greedy)->Arg(16)->Arg(64);

void BM_BeamSearch(benchmark::State& state) {
  const auto model = BuildModel(ParseConfig(kConfig));
  const Mat prefix = model->AudioPrefix(Features(40)).embeddings;
  const TokenSeq prompt = {Tokenizer::kTagEn};
  const int width = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(BeamSearch(model->lm(), prefix, prompt, width, 32));
}

BENCHMARK(BM_BeamSearch)->Arg(1)->Arg(4)->Arg(8);

void BM_TrainStep(benchmark::State& state) {
  auto model = BuildModel(ParseConfig(kConfig));
  Tokenizer tok;
  TrainExample ex{"x", Features(30), tok.Encode("<|en|>"), tok.Encode("mmm mmm mmm mmm mmm")};
  const std::vector<TrainExample> data(8, ex);
  StageSpec stage;
  stage.trainable = {state.range(0) ? "lora" : "projector"};
  stage.steps = 1;
  for (auto _ : state) benchmark::DoNotOptimize(Train(*model, data, {stage}, 1));
  state.SetLabel(state.range(0) ? "lora" : "projector");
}

BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace slam_micro
