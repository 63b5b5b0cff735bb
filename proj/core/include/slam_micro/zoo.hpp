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

// Stand-in for downloaded foundation models: a text-pretrained toy LM and a
// frame-classification-pretrained tone encoder, written as one weights
// bundle that configs reference through encoder.zoo / lm.zoo.

#ifndef SLAM_MICRO_ZOO_HPP_
#define SLAM_MICRO_ZOO_HPP_

#include <cstdint>
#include <functional>
#include <string>

#include "slam_micro/assembly.hpp"

namespace slam_micro {

struct ZooOptions {
  ToyLmConfig lm;
  FrameEncoderConfig encoder;
  std::uint64_t seed = 1;

  // LM: reconstruct text from a noisy copy of its own embeddings, prompted
  // with the asr, casr or srt template.
  int lm_steps = 2000;
  int batch_size = 8;
  double lr = 3e-3;
  double prefix_noise = 1.0;
  // Probability that a rare-word character of a keyword-prompted example is
  // replaced by a confusable one, so the list carries information the prefix
  // lacks.
  double rare_substitution = 0.35;
  double casr_fraction = 0.35;
  double srt_fraction = 0.15;

  // Encoder: per-frame symbol classification on random tone strings.
  int encoder_steps = 600;
  int encoder_batch_size = 4;
  double encoder_lr = 2e-3;

  std::function<void(const std::string& phase, int step, double loss)> on_step;
};

AssetBundle PretrainZoo(const ZooOptions& options);

}  // namespace slam_micro

#endif  // SLAM_MICRO_ZOO_HPP_
