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

#include <string>

#include "slam_micro/metrics.hpp"
#include "slam_micro/rng.hpp"
#include "slam_micro/synth_corpus.hpp"

namespace slam_micro {
namespace {

std::string Sentence(Rng& rng, int words) {
  std::string s;
  for (int i = 0; i < words; ++i) {
    if (i) s += ' ';
    s += DefaultInventory().word(DefaultInventory().SampleRank(rng));
  }
  return s;
}

void BM_Wer(benchmark::State& state) {
  Rng rng(1);
  const int n = static_cast<int>(state.range(0));
  const std::string ref = Sentence(rng, n);
  const std::string hyp = Sentence(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(Wer(ref, hyp));
}

BENCHMARK(BM_Wer)->Arg(8)->Arg(64)->Arg(256);

void BM_BiasedWer(benchmark::State& state) {
  Rng rng(2);
  const std::string ref = Sentence(rng, 64);
  const std::string hyp = Sentence(rng, 64);
  std::set<std::string> list;
  for (int i = 0; i < 100; ++i) list.insert(DefaultInventory().word(50 + i));
  for (auto _ : state) benchmark::DoNotOptimize(BiasedWer(ref, hyp, list));
}

BENCHMARK(BM_BiasedWer);

void BM_Bleu(benchmark::State& state) {
  Rng rng(3);
  std::vector<std::vector<std::string>> refs;
  std::vector<std::string> hyps;
  for (int i = 0; i < state.range(0); ++i) {
    refs.push_back({Sentence(rng, 8)});
    hyps.push_back(Sentence(rng, 8));
  }
  for (auto _ : state) benchmark::DoNotOptimize(Bleu(refs, hyps));
}

BENCHMARK(BM_Bleu)->Arg(100)->Arg(1000);

}  // namespace
}  // namespace slam_micro
