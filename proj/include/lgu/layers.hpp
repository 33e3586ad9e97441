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

#include "lgu/autodiff.hpp"

namespace lgu {

// Adds `name.w` [cout, cin, k, k] drawn uniformly with std gain/sqrt(cin*k*k), and
// `name.b` [cout] = 0 unless bias is false.
template <Real T>
void init_conv(ad::ParamStore<T>& store, const std::string& name, std::size_t cout, std::size_t cin, std::size_t k,
               std::mt19937_64& rng, double gain = 1.0, bool bias = true);

// Same-padded convolution with the parameters registered by init_conv.
template <Real T>
ad::Var<T> conv(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name, const ad::Var<T>& x);

// Per-channel spatial standardization: (x - mean) / sqrt(var + eps) over H*W for each
// channel of [C, H, W]. The mean is accumulated as deviations from the first element,
// so a constant channel maps to exact zeros.
template <Real T>
Tensor<T> norm_corr(const Tensor<T>& x, double eps = 1e-5);

template <Real T>
ad::Var<T> norm_corr(const ad::Var<T>& x, double eps = 1e-5);

// lo + (hi - lo) * sigmoid(x), kept strictly inside (lo, hi) after rounding.
template <Real T>
ad::Var<T> bounded_sigmoid(const ad::Var<T>& x, double lo, double hi);

// bound * tanh(x), kept strictly inside (-bound, bound) after rounding.
template <Real T>
ad::Var<T> bounded_tanh(const ad::Var<T>& x, double bound);

// Clamp to [lo, hi]; the gradient passes through unchanged (a rounding guard, not a nonlinearity).
template <Real T>
ad::Var<T> clamp_passthrough(const ad::Var<T>& x, double lo, double hi);

}  // namespace lgu
