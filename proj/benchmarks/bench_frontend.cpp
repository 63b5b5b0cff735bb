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

#include "slam_micro/synth_corpus.hpp"

namespace slam_micro {
namespace {

void BM_SynthUtterance(benchmark::State& state) {
  const std::string text(static_cast<std::size_t>(state.range(0)), 'k');
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(SynthUtterance(text, ToneSpec{}, ++seed));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_SynthUtterance)->Arg(10)->Arg(50);

void BM_LogMel(benchmark::State& state) {
  const Waveform w = SynthUtterance(std::string(static_cast<std::size_t>(state.range(0)), 'q'),
                                    ToneSpec{}, 1);
  for (auto _ : state) benchmark::DoNotOptimize(LogMel(w));
  state.counters["audio_s"] = w.duration_s();
}

BENCHMARK(BM_LogMel)->Arg(10)->Arg(50)->Arg(100);

}  // namespace
}  // namespace slam_micro
