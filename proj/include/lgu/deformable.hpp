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

#include <random>
#include <string>
#include <vector>

#include "lgu/autodiff.hpp"
#include "lgu/correlation.hpp"

namespace lgu {

inline constexpr double kOffsetBound = 4.0;

// Differentiable pyramid: four pooled volumes, or fi plus pooled copies of fj. The
// on-the-fly form can carry a Gaussian mask (mu, ec) evaluated per sample.
template <Real T>
struct CorrPyramidVar {
  CorrMode mode = CorrMode::materialized;
  int r = 3;
  ad::Var<T> fi;
  std::vector<ad::Var<T>> levels;
  bool masked = false;
  ad::Var<T> mu, ec;
  int r1 = 0;
  T mask_scale = T(3);
};

template <Real T>
CorrPyramidVar<T> pyramid_from_volume(const ad::Var<T>& vol, int r);

// Materialized levels built one by one: level s = corr(fi, pool_s(fj)) plus the pooled
// mask term, which equals pooling the (masked) full volume. mu and ec are null together.
template <Real T>
CorrPyramidVar<T> pyramid_materialized(const ad::Var<T>& fi, const ad::Var<T>& fj, int r,
                                       const std::type_identity_t<ad::Var<T>>* mu = nullptr,
                                       const std::type_identity_t<ad::Var<T>>* ec = nullptr, int r1 = 0,
                                       double scale = 3.0);

template <Real T>
CorrPyramidVar<T> pyramid_onthefly(const ad::Var<T>& fi, const ad::Var<T>& fj, int r);

// [4T, H, W] taps at the fixed integer grid around coords, levels concatenated.
template <Real T>
ad::Var<T> lookup_fixed(const CorrPyramidVar<T>& pyr, const ad::Var<T>& coords);

// Same with per-level offsets [2T, H, W] in level units.
template <Real T>
ad::Var<T> deformable_lookup(const CorrPyramidVar<T>& pyr, const ad::Var<T>& coords,
                             const std::vector<ad::Var<T>>& offsets);

// `prefix.top` and `prefix.res`, both 3x3 convs 2C -> 2T.
template <Real T>
void init_offset_decoders(ad::ParamStore<T>& store, const std::string& prefix, std::size_t channels, int r,
                          std::mt19937_64& rng);

template <Real T>
struct OffsetPair {
  ad::Var<T> top;  // [2T, H, W]
  ad::Var<T> res;  // [2T, H, W]
};

// top = b tanh(norm(conv(f))), res = b tanh(norm(up(conv(pool(f))))), f = concat(fi, fj), b = bound.
// H and W must be even.
template <Real T>
OffsetPair<T> decode_offsets(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix,
                             const ad::Var<T>& fi, const ad::Var<T>& fj, double eps = 1e-5,
                             double bound = kOffsetBound);

// (top + res) / 2^s.
template <Real T>
ad::Var<T> compose_scale_offsets(const ad::Var<T>& top, const ad::Var<T>& res, int s);

// Population variance over the T taps of each level, averaged over levels: [4T,H,W] -> [H,W].
template <Real T>
ad::Var<T> tap_variance(const ad::Var<T>& lookup, std::size_t levels = kPyramidLevels);

// sigmoid(tap_variance), kept below 1.
template <Real T>
ad::Var<T> uncertainty_gate(const ad::Var<T>& fixed_lookup);

// Gated per-level offsets g * (top + res) / 2^s.
template <Real T>
std::vector<ad::Var<T>> gated_offsets(const OffsetPair<T>& off, const ad::Var<T>& gate);

}  // namespace lgu
