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

#include "slam_micro/optim.hpp"

#include <cmath>

namespace slam_micro {

Adam::Adam(nn::ParamList params, const AdamConfig& cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.push_back(Mat::Zero(p.var.rows(), p.var.cols()));
    v_.push_back(Mat::Zero(p.var.rows(), p.var.cols()));
  }
}

void Adam::ZeroGrad() {
  for (auto& p : params_) p.var.node()->grad.resize(0, 0);
}

double Adam::Step(double grad_scale) {
  double sq = 0.0;
  for (const auto& p : params_) {
    if (p.var.grad().size() != 0) sq += (p.var.grad() * grad_scale).squaredNorm();
  }
  const double norm = std::sqrt(sq);
  double scale = grad_scale;
  if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm) scale *= cfg_.clip_norm / norm;
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i].var.node();
    Mat g = node.grad.size() != 0 ? Mat(node.grad * scale) : Mat::Zero(node.value.rows(), node.value.cols());
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * g;
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    node.value.array() -= cfg_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + cfg_.eps);
    nn::RoundToFloat(node.value);
  }
  ZeroGrad();
  return norm;
}

}  // namespace slam_micro
