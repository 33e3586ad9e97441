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

#include <cstdint>
#include <vector>

#include "lgu/autodiff.hpp"
#include "lgu/correlation.hpp"
#include "lgu/deformable.hpp"
#include "lgu/gaussian.hpp"
#include "lgu/temporal.hpp"

namespace lgu {

struct ModelConfig {
  std::size_t channels = 32;  // input feature channels C
  int radius = 3;
  int iterations = 8;
  // Desk-scale widths sized for single-core training.
  std::size_t hidden = 16;
  std::size_t context = 8;
  std::size_t corr_mid = 24;
  std::size_t corr_out = 16;
  std::size_t flow_mid = 8;
  std::size_t flow_out = 8;
  std::size_t head_mid = 16;
  GaussianConfig gaussian;
  double offset_bound = kOffsetBound;  // pre-gate offset bound per level
  bool use_lgu = true;     // Gaussian mask on the volume
  bool use_deform = true;  // learned tap offsets
  bool use_kan = true;     // KAN biases in the GRU
  CorrMode corr_mode = CorrMode::materialized;

  UpdateDims update_dims() const;
  void validate() const;
};

// Registers every parameter with a deterministic initialization from `seed`.
template <Real T>
void init_model(ad::ParamStore<T>& store, const ModelConfig& cfg, std::uint64_t seed);

template <Real T>
struct ModelOutput {
  std::vector<ad::Var<T>> flows;  // one [2, H, W] estimate per iteration
  std::vector<ad::Var<T>> gates;  // [H, W] per iteration (deformable only)
  ad::Var<T> e_mu;                // [2, H, W]
  ad::Var<T> e_c;                 // [2, H, W]
  OffsetPair<T> offsets;          // deformable only
  int r1 = 0;
};

// Feature and context encoding, Gaussian encoding and masking, pyramid, then the
// refinement iterations starting from zero flow.
template <Real T>
ModelOutput<T> forward(ad::Tape<T>& tape, ad::ParamStore<T>& store, const ModelConfig& cfg, const ad::Var<T>& image_i,
                       const ad::Var<T>& image_j);

}  // namespace lgu
