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
#include <cstddef>
#include <span>
#include <vector>

#include "lgu/tensor.hpp"

namespace lgu {

template <Real T>
struct Point2 {
  T x;
  T y;
};

namespace detail {

// Four-tap bilinear read with zero padding: out-of-range neighbours contribute 0.
template <Real T>
inline T bilinear_at(const T* img, long h, long w, T x, T y) {
  const T fx = std::floor(x);
  const T fy = std::floor(y);
  const long x0 = static_cast<long>(fx);
  const long y0 = static_cast<long>(fy);
  const T ax = x - fx;
  const T ay = y - fy;
  auto v = [&](long yy, long xx) -> T {
    return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? img[yy * w + xx] : T(0);
  };
  return (T(1) - ay) * ((T(1) - ax) * v(y0, x0) + ax * v(y0, x0 + 1)) +
         ay * ((T(1) - ax) * v(y0 + 1, x0) + ax * v(y0 + 1, x0 + 1));
}

// Adjoint of bilinear_at. Scatters g into grad_img (if non-null) and returns
// d/dx, d/dy of the sampled value scaled by g.
template <Real T>
inline Point2<T> bilinear_at_backward(const T* img, T* grad_img, long h, long w, T x, T y, T g) {
  const T fx = std::floor(x);
  const T fy = std::floor(y);
  const long x0 = static_cast<long>(fx);
  const long y0 = static_cast<long>(fy);
  const T ax = x - fx;
  const T ay = y - fy;
  auto inside = [&](long yy, long xx) { return yy >= 0 && yy < h && xx >= 0 && xx < w; };
  auto v = [&](long yy, long xx) -> T { return inside(yy, xx) ? img[yy * w + xx] : T(0); };
  const T v00 = v(y0, x0), v01 = v(y0, x0 + 1), v10 = v(y0 + 1, x0), v11 = v(y0 + 1, x0 + 1);
  if (grad_img != nullptr) {
    auto put = [&](long yy, long xx, T wgt) {
      if (inside(yy, xx)) grad_img[yy * w + xx] += g * wgt;
    };
    put(y0, x0, (T(1) - ay) * (T(1) - ax));
    put(y0, x0 + 1, (T(1) - ay) * ax);
    put(y0 + 1, x0, ay * (T(1) - ax));
    put(y0 + 1, x0 + 1, ay * ax);
  }
  return {g * ((T(1) - ay) * (v01 - v00) + ay * (v11 - v10)), g * ((T(1) - ax) * (v10 - v00) + ax * (v11 - v01))};
}

}  // namespace detail

// Samples a 2-D tensor at real (x = column, y = row) coordinates.
template <Real T>
Tensor<T> bilinear_sample(const Tensor<T>& src, std::span<const Point2<T>> coords);

// Gradients of sum(grad_out * bilinear_sample(src, coords)). Either output may be null.
template <Real T>
void bilinear_sample_backward(const Tensor<T>& src, std::span<const Point2<T>> coords, const Tensor<T>& grad_out,
                              Tensor<T>* grad_src, std::vector<Point2<T>>* grad_coords);

// Non-overlapping k x k mean over the trailing two dims. k must be 1, 2, 4 or 8.
template <Real T>
Tensor<T> avg_pool2d(const Tensor<T>& src, int k);

template <Real T>
Tensor<T> avg_pool2d_backward(const Tensor<T>& grad_out, const Shape& src_shape, int k);

// Same-padded, stride-1 cross-correlation.
// src [Cin, H, W], kernel [Cout, Cin, k, k] with odd k, bias [Cout] or empty.
template <Real T>
Tensor<T> conv2d(const Tensor<T>& src, const Tensor<T>& kernel, const Tensor<T>* bias);

template <Real T>
struct Conv2dGrads {
  Tensor<T> src;
  Tensor<T> kernel;
  Tensor<T> bias;
};

template <Real T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& src, const Tensor<T>& kernel, const Tensor<T>& grad_out,
                               bool need_src_grad);

// src [N, in], weights [out, in], bias [out] or null -> [N, out].
template <Real T>
Tensor<T> fully_connected(const Tensor<T>& src, const Tensor<T>& weights, const Tensor<T>* bias);

template <Real T>
struct FullyConnectedGrads {
  Tensor<T> src;
  Tensor<T> weights;
  Tensor<T> bias;
};

template <Real T>
FullyConnectedGrads<T> fully_connected_backward(const Tensor<T>& src, const Tensor<T>& weights,
                                                const Tensor<T>& grad_out);

// x2 bilinear upsampling of [C, h, w] with half-pixel centres and edge clamping.
template <Real T>
Tensor<T> upsample2x(const Tensor<T>& src);

template <Real T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad_out, const Shape& src_shape);

// A @ B for row-major 2-D tensors.
template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace lgu
