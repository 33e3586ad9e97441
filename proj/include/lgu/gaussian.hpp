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
#include "lgu/correlation.hpp"

namespace lgu {

struct GaussianConfig {
  double alpha = 5.0;
  double beta = 0.05;
  double eps = 1e-5;
  double mask_scale = 3.0;
};

// round((H + W) / 16), at least 1.
int truncation_radius(std::size_t h, std::size_t w);

// Parameters of the per-pixel encoder: `prefix.enc` 2C -> 2C, heads `prefix.res` and
// `prefix.cov` 2C -> 2 (all 1x1).
template <Real T>
void init_gaussian_encoder(ad::ParamStore<T>& store, const std::string& prefix, std::size_t channels,
                           std::mt19937_64& rng);

template <Real T>
struct GaussianRaw {
  ad::Var<T> e_r;     // [2, H, W] expectation residual
  ad::Var<T> raw_ec;  // [2, H, W] covariance before normalization
};

template <Real T>
GaussianRaw<T> encode_gaussian(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix,
                               const ad::Var<T>& fi, const ad::Var<T>& fj);

// alpha * sigmoid(norm_corr(raw)) + beta, strictly inside (beta, alpha + beta).
template <Real T>
ad::Var<T> normalize_covariance(const ad::Var<T>& raw, const GaussianConfig& cfg = {});

// Density of N(mu, diag(ec)) at P, per pixel: [2,H,W] x 3 -> [H,W].
template <Real T>
Tensor<T> density(const Tensor<T>& mu, const Tensor<T>& ec, const Tensor<T>& p);

template <Real T>
ad::Var<T> density(const ad::Var<T>& mu, const ad::Var<T>& ec, const ad::Var<T>& p);

template <Real T>
struct GaussianMask {
  int r1 = 0;
  Tensor<T> anchor;  // [2, H, W], round(mu)
  Tensor<T> values;  // [(2r1+1)^2, H, W]; window cell k = (dy + r1)(2r1 + 1) + (dx + r1)
};

// scale * density at the integer cells of the Chebyshev-r1 window around round(mu).
template <Real T>
GaussianMask<T> build_mask(const Tensor<T>& mu, const Tensor<T>& ec, int r1, double scale);

// vol[v,u,y,x] * (1 + M) for window cells inside the volume; other cells untouched.
template <Real T>
Tensor<T> apply_mask(const Tensor<T>& vol, const GaussianMask<T>& mask);

// Differentiable in the volume, mu and ec (the window anchor is not).
template <Real T>
ad::Var<T> apply_mask(const ad::Var<T>& vol, const ad::Var<T>& mu, const ad::Var<T>& ec, int r1, double scale);

}  // namespace lgu
