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

#ifndef SLAM_MICRO_OPTIM_HPP_
#define SLAM_MICRO_OPTIM_HPP_

#include <vector>

#include "slam_micro/nn.hpp"

namespace slam_micro {

struct AdamConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Adam over a fixed list of leaf parameters. Gradients are read from the
// leaves, the update is applied in 64-bit and the result rounded to float32
// so parameters stay representable in the asset format.
class Adam {
 public:
  Adam(nn::ParamList params, const AdamConfig& cfg);

  // Applies one update from the accumulated leaf gradients (missing gradients
  // count as zero), then clears them. Returns the pre-clip global norm.
  double Step(double grad_scale = 1.0);
  void ZeroGrad();
  void set_lr(double lr) { cfg_.lr = lr; }
  const nn::ParamList& params() const { return params_; }

 private:
  nn::ParamList params_;
  AdamConfig cfg_;
  std::vector<Mat> m_, v_;
  long t_ = 0;
};

}  // namespace slam_micro

#endif  // SLAM_MICRO_OPTIM_HPP_
