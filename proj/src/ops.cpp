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

#include "lgu/ops.hpp"

#include <Eigen/Core>
#include <sstream>

namespace lgu {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

namespace {

template <Real T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <Real T>
using MapMat = Eigen::Map<RowMat<T>>;
template <Real T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <Real T>
CMapMat<T> as_mat(const Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return CMapMat<T>(t.ptr(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <Real T>
MapMat<T> as_mat(Tensor<T>& t, std::size_t rows, std::size_t cols) {
  return MapMat<T>(t.ptr(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

void check_pool_kernel(int k) {
  if (k != 1 && k != 2 && k != 4 && k != 8) throw ShapeError("avg_pool2d: kernel must be 1, 2, 4 or 8");
}

// Valid output columns [x0, x1) for kernel column kx: source column x + kx - pad inside [0, w).
inline void valid_columns(std::size_t kx, std::size_t pad, std::size_t w, std::size_t& x0, std::size_t& x1) {
  x0 = kx < pad ? pad - kx : 0;
  x1 = kx > pad ? w - (kx - pad) : w;
  if (x1 < x0) x1 = x0;
}

// col[(ci*k + ky)*k + kx, y*W + x] = src[ci, y + ky - pad, x + kx - pad] (zero outside).
template <Real T>
Tensor<T> im2col(const Tensor<T>& src, std::size_t k) {
  const std::size_t cin = src.dim(0), h = src.dim(1), w = src.dim(2), pad = k / 2;
  Tensor<T> col({cin * k * k, h * w});
  T* out = col.ptr();
  const T* in = src.ptr();
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = out + ((ci * k + ky) * k + kx) * h * w;
        std::size_t x0, x1;
        valid_columns(kx, pad, w, x0, x1);
        for (std::size_t y = 0; y < h; ++y) {
          if (y + ky < pad || y + ky - pad >= h) continue;
          const T* srow = in + (ci * h + (y + ky - pad)) * w + (x0 + kx - pad);
          std::copy(srow, srow + (x1 - x0), row + y * w + x0);
        }
      }
    }
  }
  return col;
}

template <Real T>
Tensor<T> col2im(const Tensor<T>& col, std::size_t cin, std::size_t h, std::size_t w, std::size_t k) {
  const std::size_t pad = k / 2;
  Tensor<T> img({cin, h, w});
  T* out = img.ptr();
  const T* in = col.ptr();
  for (std::size_t ci = 0; ci < cin; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = in + ((ci * k + ky) * k + kx) * h * w;
        std::size_t x0, x1;
        valid_columns(kx, pad, w, x0, x1);
        for (std::size_t y = 0; y < h; ++y) {
          if (y + ky < pad || y + ky - pad >= h) continue;
          T* drow = out + (ci * h + (y + ky - pad)) * w + (x0 + kx - pad);
          const T* srow = row + y * w + x0;
          for (std::size_t x = 0; x < x1 - x0; ++x) drow[x] += srow[x];
        }
      }
    }
  }
  return img;
}

template <Real T>
void check_conv_shapes(const Tensor<T>& src, const Tensor<T>& kernel, const Tensor<T>* bias) {
  if (src.ndim() != 3) throw ShapeError("conv2d: src must be [Cin, H, W], got " + shape_str(src.shape()));
  if (kernel.ndim() != 4 || kernel.dim(2) != kernel.dim(3) || kernel.dim(2) % 2 == 0) {
    throw ShapeError("conv2d: kernel must be [Cout, Cin, k, k] with odd k, got " + shape_str(kernel.shape()));
  }
  if (kernel.dim(1) != src.dim(0)) {
    throw ShapeError("conv2d: channel mismatch, kernel expects " + std::to_string(kernel.dim(1)) + " but src has " +
                     std::to_string(src.dim(0)));
  }
  if (bias != nullptr && (bias->ndim() != 1 || bias->dim(0) != kernel.dim(0))) {
    throw ShapeError("conv2d: bias must be [Cout]");
  }
}

}  // namespace

template <Real T>
Tensor<T> bilinear_sample(const Tensor<T>& src, std::span<const Point2<T>> coords) {
  if (src.ndim() != 2) throw ShapeError("bilinear_sample: src must be 2-D, got " + shape_str(src.shape()));
  const long h = static_cast<long>(src.dim(0)), w = static_cast<long>(src.dim(1));
  Tensor<T> out({coords.size()});
  for (std::size_t i = 0; i < coords.size(); ++i) out[i] = detail::bilinear_at(src.ptr(), h, w, coords[i].x, coords[i].y);
  check_finite(out, "bilinear_sample");
  return out;
}

template <Real T>
void bilinear_sample_backward(const Tensor<T>& src, std::span<const Point2<T>> coords, const Tensor<T>& grad_out,
                              Tensor<T>* grad_src, std::vector<Point2<T>>* grad_coords) {
  if (src.ndim() != 2) throw ShapeError("bilinear_sample: src must be 2-D, got " + shape_str(src.shape()));
  if (grad_out.numel() != coords.size()) throw ShapeError("bilinear_sample_backward: grad length mismatch");
  const long h = static_cast<long>(src.dim(0)), w = static_cast<long>(src.dim(1));
  if (grad_src != nullptr) *grad_src = Tensor<T>(src.shape());
  if (grad_coords != nullptr) grad_coords->assign(coords.size(), Point2<T>{0, 0});
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const auto d = detail::bilinear_at_backward(src.ptr(), grad_src ? grad_src->ptr() : nullptr, h, w, coords[i].x,
                                                coords[i].y, grad_out[i]);
    if (grad_coords != nullptr) (*grad_coords)[i] = d;
  }
}

template <Real T>
Tensor<T> avg_pool2d(const Tensor<T>& src, int k) {
  check_pool_kernel(k);
  if (src.ndim() < 2) throw ShapeError("avg_pool2d: need at least 2 dims, got " + shape_str(src.shape()));
  const std::size_t nd = src.ndim();
  const std::size_t h = src.dim(nd - 2), w = src.dim(nd - 1), kk = static_cast<std::size_t>(k);
  if (h % kk != 0 || w % kk != 0) {
    throw ShapeError("avg_pool2d: extents " + shape_str(src.shape()) + " not divisible by " + std::to_string(k));
  }
  if (k == 1) return src;
  const std::size_t oh = h / kk, ow = w / kk, planes = src.numel() / (h * w);
  Shape os = src.shape();
  os[nd - 2] = oh;
  os[nd - 1] = ow;
  Tensor<T> out(os);
  const T inv = T(1) / static_cast<T>(kk * kk);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* in = src.ptr() + p * h * w;
    T* o = out.ptr() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T acc = 0;
        for (std::size_t dy = 0; dy < kk; ++dy) {
          const T* row = in + (oy * kk + dy) * w + ox * kk;
          for (std::size_t dx = 0; dx < kk; ++dx) acc += row[dx];
        }
        o[oy * ow + ox] = acc * inv;
      }
    }
  }
  check_finite(out, "avg_pool2d");
  return out;
}

template <Real T>
Tensor<T> avg_pool2d_backward(const Tensor<T>& grad_out, const Shape& src_shape, int k) {
  check_pool_kernel(k);
  if (k == 1) return grad_out.reshaped(src_shape);
  const std::size_t nd = src_shape.size();
  const std::size_t h = src_shape[nd - 2], w = src_shape[nd - 1], kk = static_cast<std::size_t>(k);
  const std::size_t oh = h / kk, ow = w / kk, planes = shape_numel(src_shape) / (h * w);
  Tensor<T> g(src_shape);
  const T inv = T(1) / static_cast<T>(kk * kk);
  for (std::size_t p = 0; p < planes; ++p) {
    const T* go = grad_out.ptr() + p * oh * ow;
    T* gi = g.ptr() + p * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) gi[y * w + x] = go[(y / kk) * ow + x / kk] * inv;
    }
  }
  return g;
}

template <Real T>
Tensor<T> conv2d(const Tensor<T>& src, const Tensor<T>& kernel, const Tensor<T>* bias) {
  check_conv_shapes(src, kernel, bias);
  const std::size_t cin = src.dim(0), h = src.dim(1), w = src.dim(2), cout = kernel.dim(0), k = kernel.dim(2);
  Tensor<T> out({cout, h, w});
  auto o = as_mat(out, cout, h * w);
  const auto wmat = as_mat(kernel, cout, cin * k * k);
  if (k == 1) {
    o.noalias() = wmat * as_mat(src, cin, h * w);
  } else {
    const Tensor<T> col = im2col(src, k);
    o.noalias() = wmat * as_mat(col, cin * k * k, h * w);
  }
  if (bias != nullptr) {
    for (std::size_t c = 0; c < cout; ++c) o.row(static_cast<Eigen::Index>(c)).array() += (*bias)[c];
  }
  check_finite(out, "conv2d");
  return out;
}

template <Real T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& src, const Tensor<T>& kernel, const Tensor<T>& grad_out,
                               bool need_src_grad) {
  check_conv_shapes<T>(src, kernel, nullptr);
  const std::size_t cin = src.dim(0), h = src.dim(1), w = src.dim(2), cout = kernel.dim(0), k = kernel.dim(2);
  if (grad_out.shape() != Shape{cout, h, w}) throw ShapeError("conv2d_backward: grad_out shape mismatch");
  Conv2dGrads<T> g{Tensor<T>(), Tensor<T>(kernel.shape()), Tensor<T>({cout})};
  const auto go = as_mat(grad_out, cout, h * w);
  const auto wmat = as_mat(kernel, cout, cin * k * k);
  auto gw = as_mat(g.kernel, cout, cin * k * k);
  if (k == 1) {
    gw.noalias() = go * as_mat(src, cin, h * w).transpose();
    if (need_src_grad) {
      g.src = Tensor<T>({cin, h, w});
      as_mat(g.src, cin, h * w).noalias() = wmat.transpose() * go;
    }
  } else {
    const Tensor<T> col = im2col(src, k);
    gw.noalias() = go * as_mat(col, cin * k * k, h * w).transpose();
    if (need_src_grad) {
      Tensor<T> gcol({cin * k * k, h * w});
      as_mat(gcol, cin * k * k, h * w).noalias() = wmat.transpose() * go;
      g.src = col2im(gcol, cin, h, w, k);
    }
  }
  // Plain loops: Eigen reductions over unaligned maps reorder by address.
  for (std::size_t c = 0; c < cout; ++c) {
    const T* row = grad_out.ptr() + c * h * w;
    T acc = 0;
    for (std::size_t i = 0; i < h * w; ++i) acc += row[i];
    g.bias[c] = acc;
  }
  return g;
}

template <Real T>
Tensor<T> fully_connected(const Tensor<T>& src, const Tensor<T>& weights, const Tensor<T>* bias) {
  if (src.ndim() != 2 || weights.ndim() != 2) throw ShapeError("fully_connected: src and weights must be 2-D");
  if (src.dim(1) != weights.dim(1)) {
    throw ShapeError("fully_connected: channel mismatch " + shape_str(src.shape()) + " vs " +
                     shape_str(weights.shape()));
  }
  const std::size_t n = src.dim(0), in = src.dim(1), outc = weights.dim(0);
  if (bias != nullptr && (bias->ndim() != 1 || bias->dim(0) != outc)) throw ShapeError("fully_connected: bad bias");
  Tensor<T> out({n, outc});
  auto o = as_mat(out, n, outc);
  o.noalias() = as_mat(src, n, in) * as_mat(weights, outc, in).transpose();
  if (bias != nullptr) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < outc; ++c) out.at(i, c) += (*bias)[c];
    }
  }
  check_finite(out, "fully_connected");
  return out;
}

template <Real T>
FullyConnectedGrads<T> fully_connected_backward(const Tensor<T>& src, const Tensor<T>& weights,
                                                const Tensor<T>& grad_out) {
  const std::size_t n = src.dim(0), in = src.dim(1), outc = weights.dim(0);
  FullyConnectedGrads<T> g{Tensor<T>({n, in}), Tensor<T>({outc, in}), Tensor<T>({outc})};
  const auto go = as_mat(grad_out, n, outc);
  as_mat(g.src, n, in).noalias() = go * as_mat(weights, outc, in);
  as_mat(g.weights, outc, in).noalias() = go.transpose() * as_mat(src, n, in);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < outc; ++c) g.bias[c] += grad_out[i * outc + c];
  }
  return g;
}

namespace {

struct UpsampleTap {
  std::size_t i0;
  std::size_t i1;
  double frac;
};

std::vector<UpsampleTap> upsample_taps(std::size_t in) {
  std::vector<UpsampleTap> taps(2 * in);
  for (std::size_t o = 0; o < 2 * in; ++o) {
    double s = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (s < 0) s = 0;
    auto i0 = static_cast<std::size_t>(s);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, s - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace

template <Real T>
Tensor<T> upsample2x(const Tensor<T>& src) {
  if (src.ndim() != 3) throw ShapeError("upsample2x: src must be [C, h, w]");
  const std::size_t c = src.dim(0), h = src.dim(1), w = src.dim(2);
  const auto ty = upsample_taps(h), tx = upsample_taps(w);
  Tensor<T> out({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* in = src.ptr() + ch * h * w;
    T* o = out.ptr() + ch * 4 * h * w;
    for (std::size_t y = 0; y < 2 * h; ++y) {
      const T fy = static_cast<T>(ty[y].frac);
      for (std::size_t x = 0; x < 2 * w; ++x) {
        const T fx = static_cast<T>(tx[x].frac);
        const T top = (T(1) - fx) * in[ty[y].i0 * w + tx[x].i0] + fx * in[ty[y].i0 * w + tx[x].i1];
        const T bot = (T(1) - fx) * in[ty[y].i1 * w + tx[x].i0] + fx * in[ty[y].i1 * w + tx[x].i1];
        o[y * 2 * w + x] = (T(1) - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

template <Real T>
Tensor<T> upsample2x_backward(const Tensor<T>& grad_out, const Shape& src_shape) {
  const std::size_t c = src_shape[0], h = src_shape[1], w = src_shape[2];
  const auto ty = upsample_taps(h), tx = upsample_taps(w);
  Tensor<T> g(src_shape);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* go = grad_out.ptr() + ch * 4 * h * w;
    T* gi = g.ptr() + ch * h * w;
    for (std::size_t y = 0; y < 2 * h; ++y) {
      const T fy = static_cast<T>(ty[y].frac);
      for (std::size_t x = 0; x < 2 * w; ++x) {
        const T fx = static_cast<T>(tx[x].frac);
        const T v = go[y * 2 * w + x];
        gi[ty[y].i0 * w + tx[x].i0] += (T(1) - fy) * (T(1) - fx) * v;
        gi[ty[y].i0 * w + tx[x].i1] += (T(1) - fy) * fx * v;
        gi[ty[y].i1 * w + tx[x].i0] += fy * (T(1) - fx) * v;
        gi[ty[y].i1 * w + tx[x].i1] += fy * fx * v;
      }
    }
  }
  return g;
}

template <Real T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  Tensor<T> out({a.dim(0), b.dim(1)});
  as_mat(out, a.dim(0), b.dim(1)).noalias() = as_mat(a, a.dim(0), a.dim(1)) * as_mat(b, b.dim(0), b.dim(1));
  return out;
}

#define LGU_INSTANTIATE_OPS(T)                                                                                 \
  template Tensor<T> bilinear_sample(const Tensor<T>&, std::span<const Point2<T>>);                          \
  template void bilinear_sample_backward(const Tensor<T>&, std::span<const Point2<T>>, const Tensor<T>&,      \
                                         Tensor<T>*, std::vector<Point2<T>>*);                                \
  template Tensor<T> avg_pool2d(const Tensor<T>&, int);                                                       \
  template Tensor<T> avg_pool2d_backward(const Tensor<T>&, const Shape&, int);                                \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);                            \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, bool);        \
  template Tensor<T> fully_connected(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);                   \
  template FullyConnectedGrads<T> fully_connected_backward(const Tensor<T>&, const Tensor<T>&,                \
                                                           const Tensor<T>&);                                 \
  template Tensor<T> upsample2x(const Tensor<T>&);                                                            \
  template Tensor<T> upsample2x_backward(const Tensor<T>&, const Shape&);                                     \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);

LGU_INSTANTIATE_OPS(float)
LGU_INSTANTIATE_OPS(double)

}  // namespace lgu
