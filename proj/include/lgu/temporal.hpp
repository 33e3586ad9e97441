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

#include <array>
#include <random>
#include <string>
#include <type_traits>

#include "lgu/autodiff.hpp"

namespace lgu {

// Cubic B-spline on a uniform grid of 8 intervals over [-1, 1], knots
// t_i = -1 + (i - 3) / 4 for i = 0..14, giving 11 basis functions.
inline constexpr int kSplineIntervals = 8;
inline constexpr int kSplineOrder = 3;
inline constexpr std::size_t kSplineBases = kSplineIntervals + kSplineOrder;

// The four non-zero basis values at x (clamped to [-1, 1]) and their derivatives in x.
// `first` is the index of the first one.
template <Real T>
struct SplineSupport {
  std::size_t first = 0;
  std::array<T, 4> value{};
  std::array<T, 4> slope{};
};

template <Real T>
SplineSupport<T> spline_support(T x);

// phi_c(u) = base[c] * u + sum_k coef[c, k] B_k(clamp(u, -1, 1)), per channel and pixel.
// u [D, H, W], base [D], coef [D, 11].
template <Real T>
ad::Var<T> kan_activation(const ad::Var<T>& u, const ad::Var<T>& base, const ad::Var<T>& coef);

// `prefix.gate` (1x1 D -> D) and, per head z/r/o, `prefix.<head>.base`, `.coef` and `.mix`
// (1x1 D -> D, no bias).
template <Real T>
void init_kan_bias(ad::ParamStore<T>& store, const std::string& prefix, std::size_t hidden, std::mt19937_64& rng);

template <Real T>
struct KanBias {
  ad::Var<T> z, r, o;
};

// u = sigmoid(conv1x1(h)) * h; each bias = mix(phi(u)).
template <Real T>
KanBias<T> kan_bias(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix, const ad::Var<T>& h);

// `prefix.zr` (3x3, D + X -> 2D) and `prefix.o` (3x3, D + X -> D).
template <Real T>
void init_gru(ad::ParamStore<T>& store, const std::string& prefix, std::size_t hidden, std::size_t input,
              std::mt19937_64& rng);

// z, r = sigmoid(conv([h, x]) + b); o = tanh(conv([r h, x]) + b_o); h' = (1 - z) h + z o.
// Without biases this is a plain convolutional GRU.
template <Real T>
ad::Var<T> gru_step(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix, const ad::Var<T>& h,
                    const ad::Var<T>& x, const std::type_identity_t<KanBias<T>>* bias);

struct UpdateDims {
  std::size_t corr = 196;       // lookup channels, 4 (2r+1)^2
  std::size_t hidden = 64;      // D_h
  std::size_t context = 32;     // context channels fed to the GRU input
  std::size_t corr_mid = 64;
  std::size_t corr_out = 48;
  std::size_t flow_mid = 32;
  std::size_t flow_out = 16;
  std::size_t head_mid = 64;

  std::size_t gru_input() const { return corr_out + flow_out + context; }
};

template <Real T>
void init_update_operator(ad::ParamStore<T>& store, const std::string& prefix, const UpdateDims& dims,
                          std::mt19937_64& rng);

template <Real T>
struct UpdateResult {
  ad::Var<T> hidden;
  ad::Var<T> delta_flow;  // [2, H, W]
};

// One refinement iteration: encode (lookup, flow), concatenate the context, step the GRU
// (with KAN biases when use_kan) and decode a flow increment.
template <Real T>
UpdateResult<T> update_operator(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix,
                                const ad::Var<T>& hidden, const ad::Var<T>& lookup, const ad::Var<T>& flow,
                                const ad::Var<T>& context, bool use_kan);

}  // namespace lgu
