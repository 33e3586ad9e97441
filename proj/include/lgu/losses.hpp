// Copyright 2026 The LGU Authors. All Rights Reserved.
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

#pragma once

#include <vector>

#include "lgu/autodiff.hpp"

namespace lgu {

struct LossWeights {
  double flow = 0.05;
  double self = 0.08;
  double gamma = 0.9;  // per-iteration decay of the flow loss
};

// sum_t gamma^(N - t) * (sum over valid pixels of |dx| + |dy|) / #valid, t = 1..N.
// gt [2, H, W], valid [H, W] with entries 0 or 1.
template <Real T>
ad::Var<T> flow_loss(const std::vector<ad::Var<T>>& flows, const Tensor<T>& gt, const Tensor<T>& valid,
                     double gamma = 0.9);

// sum_p |mu - P|^2 / (HW * 2 * det_p) + mean_p 0.5 log det_p, det_p = ec0 * ec1.
// P receives an exactly zero gradient.
template <Real T>
ad::Var<T> self_supervised_loss(const ad::Var<T>& mu, const ad::Var<T>& ec, const ad::Var<T>& p);

template <Real T>
ad::Var<T> total_loss(const ad::Var<T>& l_flow, const ad::Var<T>& l_self, const LossWeights& w = {});

// Mean Euclidean distance over valid pixels.
template <Real T>
double end_point_error(const Tensor<T>& flow, const Tensor<T>& gt, const Tensor<T>& valid);

}  // namespace lgu
