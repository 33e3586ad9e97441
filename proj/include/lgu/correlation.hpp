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

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "lgu/autodiff.hpp"
#include "lgu/tensor.hpp"

namespace lgu {

inline constexpr int kPyramidLevels = 4;

// Pooling stride of pyramid level s (1, 2, 4, 8).
inline constexpr int level_stride(int s) { return 1 << s; }

// Taps per level for lookup radius r: (2r+1)^2.
inline constexpr std::size_t lookup_taps(int r) { return static_cast<std::size_t>((2 * r + 1) * (2 * r + 1)); }

// Dominant multiply-accumulate counts of the two paths: C*(HW)^2 to materialize the
// full volume, C*HW*(2r+1)^2 per level to sample on the fly.
inline double mac_materialized(std::size_t h, std::size_t w, std::size_t c) {
  const double hw = static_cast<double>(h * w);
  return static_cast<double>(c) * hw * hw;
}
inline double mac_onthefly(std::size_t h, std::size_t w, std::size_t c, int r) {
  return static_cast<double>(c) * static_cast<double>(h * w) * static_cast<double>(lookup_taps(r));
}

// Diagonal 2-D Gaussian density at offset (dx, dy) from the mean with variances (c0, c1).
template <Real T>
inline T gaussian_density(T dx, T dy, T c0, T c1) {
  return std::exp(T(-0.5) * (dx * dx / c0 + dy * dy / c1)) / (T(2) * std::numbers::pi_v<T> * std::sqrt(c0 * c1));
}

// Continuous mask used by the on-the-fly path: a sample at level-0 coordinate q is scaled by
// 1 + scale * density(q) when q lies within Chebyshev distance r1 of round(mu), else left alone.
template <Real T>
struct ContinuousMask {
  const Tensor<T>* mu = nullptr;  // [2, H, W]
  const Tensor<T>* ec = nullptr;  // [2, H, W]
  int r1 = 0;
  T scale = T(3);
};

// ---- raw kernels ----------------------------------------------------------------------

// vol[v, u, y, x] = <fi[:, v, u], fj[:, y, x]> / sqrt(C). fi [C,H,W], fj [C,H2,W2].
template <Real T>
Tensor<T> build_volume(const Tensor<T>& fi, const Tensor<T>& fj);

// Levels s = 0..3: avg_pool2d of the trailing two dims with stride 2^s.
template <Real T>
std::vector<Tensor<T>> volume_pyramid(const Tensor<T>& vol);

// Bilinear taps of one pyramid level. level [H, W, h, w], coords [2, H, W] in level-0
// pixels, offsets [2T, H, W] in level units (channel 2t = x, 2t+1 = y) or null.
// Returns [T, H, W]; tap t = (j + r)(2r + 1) + (i + r) samples
//   (x / 2^s + i + dx_t, y / 2^s + j + dy_t).
template <Real T>
Tensor<T> lookup_level(const Tensor<T>& level, const Tensor<T>& coords, int s, int r, const std::type_identity_t<Tensor<T>>* offsets);

// Same samples computed from features: fj_pooled = avg_pool2d(fj, 2^s).
template <Real T>
Tensor<T> lookup_onthefly_level(const Tensor<T>& fi, const Tensor<T>& fj_pooled, const Tensor<T>& coords, int s,
                                int r, const std::type_identity_t<Tensor<T>>* offsets,
                                const std::type_identity_t<ContinuousMask<T>>* mask = nullptr);

enum class CorrMode { materialized, onthefly };

// Either four pooled volumes or (fi, pooled copies of fj).
template <Real T>
class CorrPyramid {
 public:
  static CorrPyramid materialize(const Tensor<T>& fi, const Tensor<T>& fj, int r);
  static CorrPyramid onthefly(const Tensor<T>& fi, const Tensor<T>& fj, int r);

  CorrMode mode() const { return mode_; }
  int radius() const { return r_; }
  const std::vector<Tensor<T>>& levels() const { return levels_; }

  // [4T, H, W]; offsets holds one [2T, H, W] tensor per level or is empty.
  Tensor<T> lookup(const Tensor<T>& coords, const std::vector<Tensor<T>>& offsets = {},
                   const ContinuousMask<T>* mask = nullptr) const;

 private:
  CorrMode mode_ = CorrMode::materialized;
  int r_ = 3;
  Tensor<T> fi_;
  std::vector<Tensor<T>> levels_;  // volumes, or pooled fj
};

// ---- differentiable versions ----------------------------------------------------------

template <Real T>
ad::Var<T> build_volume(const ad::Var<T>& fi, const ad::Var<T>& fj);

template <Real T>
ad::Var<T> lookup_level(const ad::Var<T>& level, const ad::Var<T>& coords, int s, int r, const std::type_identity_t<ad::Var<T>>* offsets);

// Mask inputs (mu, ec) may be null together for an unmasked lookup.
template <Real T>
ad::Var<T> lookup_onthefly_level(const ad::Var<T>& fi, const ad::Var<T>& fj_pooled, const ad::Var<T>& coords, int s,
                                 int r, const std::type_identity_t<ad::Var<T>>* offsets,
                                 const std::type_identity_t<ad::Var<T>>* mu = nullptr,
                                 const std::type_identity_t<ad::Var<T>>* ec = nullptr, int r1 = 0, std::type_identity_t<T> scale = T(3));

}  // namespace lgu
