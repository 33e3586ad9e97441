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

#include "lgu/correlation.hpp"

#include <Eigen/Core>
#include <algorithm>

#include "lgu/ops.hpp"
#include "lgu/parallel.hpp"

namespace lgu {

namespace {

template <Real T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <Real T>
using CMap = Eigen::Map<const RowMat<T>>;
template <Real T>
using Map = Eigen::Map<RowMat<T>>;

using Index = Eigen::Index;

void check_features(const Shape& a, const Shape& b, const char* op) {
  if (a.size() != 3 || b.size() != 3 || a[0] != b[0]) {
    throw ShapeError(std::string(op) + ": need features [C,H,W] with equal C, got " + shape_str(a) + ", " +
                     shape_str(b));
  }
}

void check_lookup(const Shape& level, const Shape& coords, int s, int r, const Shape* offsets) {
  if (coords.size() != 3 || coords[0] != 2) throw ShapeError("lookup: coords must be [2,H,W], got " + shape_str(coords));
  if (level.size() != 4 || level[0] != coords[1] || level[1] != coords[2]) {
    throw ShapeError("lookup: level " + shape_str(level) + " does not match coords " + shape_str(coords));
  }
  if (s < 0 || s >= kPyramidLevels || r < 0) throw ContractError("lookup: bad level or radius");
  if (offsets && *offsets != Shape{2 * lookup_taps(r), coords[1], coords[2]}) {
    throw ShapeError("lookup: offsets must be [2T,H,W], got " + shape_str(*offsets));
  }
}

// Sample position of tap t for pixel p at level s.
template <Real T>
struct TapGeometry {
  const T* coords;
  const T* offsets;
  std::size_t n;
  int r;
  T inv_stride;

  Point2<T> at(std::size_t p, std::size_t t) const {
    const int d = 2 * r + 1;
    const T i = static_cast<T>(static_cast<int>(t) % d - r);
    const T j = static_cast<T>(static_cast<int>(t) / d - r);
    T x = coords[p] * inv_stride + i;
    T y = coords[n + p] * inv_stride + j;
    if (offsets) {
      x += offsets[(2 * t) * n + p];
      y += offsets[(2 * t + 1) * n + p];
    }
    return {x, y};
  }

  // Calls fn(t, x, y) for every tap of pixel p, with the arithmetic of at().
  template <typename Fn>
  void for_taps(std::size_t p, Fn&& fn) const {
    const T bx = coords[p] * inv_stride, by = coords[n + p] * inv_stride;
    std::size_t t = 0;
    for (int j = -r; j <= r; ++j) {
      for (int i = -r; i <= r; ++i, ++t) {
        T x = bx + static_cast<T>(i);
        T y = by + static_cast<T>(j);
        if (offsets) {
          x += offsets[(2 * t) * n + p];
          y += offsets[(2 * t + 1) * n + p];
        }
        fn(t, x, y);
      }
    }
  }
};

// Bilinear corners of (x, y); same arithmetic as detail::bilinear_at.
template <Real T>
struct Corners {
  long x0, y0;
  T ax, ay;

  Corners(T x, T y) {
    const T fx = std::floor(x), fy = std::floor(y);
    x0 = static_cast<long>(fx);
    y0 = static_cast<long>(fy);
    ax = x - fx;
    ay = y - fy;
  }
  bool interior(long h, long w) const { return x0 >= 0 && y0 >= 0 && x0 + 1 < w && y0 + 1 < h; }
  T sample_interior(const T* img, long w) const {
    const T* a = img + y0 * w + x0;
    const T* b = a + w;
    return (T(1) - ay) * ((T(1) - ax) * a[0] + ax * a[1]) + ay * ((T(1) - ax) * b[0] + ax * b[1]);
  }
};

template <Real T>
struct MaskEval {
  T factor = T(1);
  T m = T(0);  // scale * density, 0 outside the window
  T dx0 = 0, dy0 = 0, c0 = 1, c1 = 1;
  bool inside = false;
};

// Continuous mask factor at a level-s sample position (x, y) for pixel p.
template <Real T>
MaskEval<T> eval_mask(const T* mu, const T* ec, std::size_t n, std::size_t p, int r1, T scale, T stride, T x, T y) {
  MaskEval<T> e;
  const T qx = x * stride, qy = y * stride;
  const T ax = std::round(mu[p]), ay = std::round(mu[n + p]);
  if (std::max(std::abs(qx - ax), std::abs(qy - ay)) > static_cast<T>(r1)) return e;
  e.inside = true;
  e.dx0 = qx - mu[p];
  e.dy0 = qy - mu[n + p];
  e.c0 = ec[p];
  e.c1 = ec[n + p];
  e.m = scale * gaussian_density(e.dx0, e.dy0, e.c0, e.c1);
  e.factor = T(1) + e.m;
  return e;
}

// Feature maps transposed to [pixels, C] with fi pre-scaled by 1/sqrt(C).
template <Real T>
RowMat<T> pixel_major(const Tensor<T>& f, std::type_identity_t<T> scale) {
  const Index c = static_cast<Index>(f.dim(0)), n = static_cast<Index>(f.dim(1) * f.dim(2));
  return CMap<T>(f.ptr(), c, n).transpose() * scale;
}

}  // namespace

template <Real T>
Tensor<T> build_volume(const Tensor<T>& fi, const Tensor<T>& fj) {
  check_features(fi.shape(), fj.shape(), "build_volume");
  const std::size_t c = fi.dim(0), n1 = fi.dim(1) * fi.dim(2), n2 = fj.dim(1) * fj.dim(2);
  Tensor<T> vol({fi.dim(1), fi.dim(2), fj.dim(1), fj.dim(2)});
  const T scale = T(1) / std::sqrt(static_cast<T>(c));
  Map<T> out(vol.ptr(), static_cast<Index>(n1), static_cast<Index>(n2));
  out.noalias() = CMap<T>(fi.ptr(), Index(c), Index(n1)).transpose() * CMap<T>(fj.ptr(), Index(c), Index(n2));
  out *= scale;
  check_finite(vol, "build_volume");
  return vol;
}

template <Real T>
std::vector<Tensor<T>> volume_pyramid(const Tensor<T>& vol) {
  std::vector<Tensor<T>> levels;
  levels.push_back(vol);
  for (int s = 1; s < kPyramidLevels; ++s) levels.push_back(avg_pool2d(vol, level_stride(s)));
  return levels;
}

template <Real T>
Tensor<T> lookup_level(const Tensor<T>& level, const Tensor<T>& coords, int s, int r, const std::type_identity_t<Tensor<T>>* offsets) {
  check_lookup(level.shape(), coords.shape(), s, r, offsets ? &offsets->shape() : nullptr);
  const std::size_t hh = coords.dim(1), ww = coords.dim(2), n = hh * ww, nt = lookup_taps(r);
  const long h = static_cast<long>(level.dim(2)), w = static_cast<long>(level.dim(3));
  Tensor<T> out({nt, hh, ww});
  const TapGeometry<T> geo{coords.ptr(), offsets ? offsets->ptr() : nullptr, n, r, T(1) / T(level_stride(s))};
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const T* plane = level.ptr() + p * static_cast<std::size_t>(h * w);
      T* o = out.ptr() + p;
      geo.for_taps(p, [&](std::size_t t, T x, T y) {
        const Corners<T> k(x, y);
        o[t * n] = k.interior(h, w) ? k.sample_interior(plane, w) : detail::bilinear_at(plane, h, w, x, y);
      });
    }
  });
  return out;
}

template <Real T>
Tensor<T> lookup_onthefly_level(const Tensor<T>& fi, const Tensor<T>& fj_pooled, const Tensor<T>& coords, int s,
                                int r, const std::type_identity_t<Tensor<T>>* offsets,
                                const std::type_identity_t<ContinuousMask<T>>* mask) {
  check_features(fi.shape(), fj_pooled.shape(), "lookup_onthefly");
  const Shape lvl{fi.dim(1), fi.dim(2), fj_pooled.dim(1), fj_pooled.dim(2)};
  check_lookup(lvl, coords.shape(), s, r, offsets ? &offsets->shape() : nullptr);
  const std::size_t c = fi.dim(0), n = fi.dim(1) * fi.dim(2), nt = lookup_taps(r);
  const long h = static_cast<long>(fj_pooled.dim(1)), w = static_cast<long>(fj_pooled.dim(2));
  const RowMat<T> a = pixel_major(fi, T(1) / std::sqrt(static_cast<T>(c)));
  const RowMat<T> b = pixel_major(fj_pooled, T(1));
  Tensor<T> out({nt, fi.dim(1), fi.dim(2)});
  const T stride = T(level_stride(s));
  const TapGeometry<T> geo{coords.ptr(), offsets ? offsets->ptr() : nullptr, n, r, T(1) / stride};
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      const auto ap = a.row(Index(p));
      for (std::size_t t = 0; t < nt; ++t) {
        const auto q = geo.at(p, t);
        const T fx = std::floor(q.x), fy = std::floor(q.y);
        const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
        const T ax = q.x - fx, ay = q.y - fy;
        auto corr = [&](long yy, long xx) -> T {
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) return T(0);
          return ap.dot(b.row(Index(yy * w + xx)));
        };
        T v = (T(1) - ay) * ((T(1) - ax) * corr(y0, x0) + ax * corr(y0, x0 + 1)) +
              ay * ((T(1) - ax) * corr(y0 + 1, x0) + ax * corr(y0 + 1, x0 + 1));
        if (mask) v *= eval_mask(mask->mu->ptr(), mask->ec->ptr(), n, p, mask->r1, mask->scale, stride, q.x, q.y).factor;
        out[t * n + p] = v;
      }
    }
  });
  check_finite(out, "lookup_onthefly");
  return out;
}

template <Real T>
CorrPyramid<T> CorrPyramid<T>::materialize(const Tensor<T>& fi, const Tensor<T>& fj, int r) {
  CorrPyramid p;
  p.mode_ = CorrMode::materialized;
  p.r_ = r;
  p.levels_ = volume_pyramid(build_volume(fi, fj));
  return p;
}

template <Real T>
CorrPyramid<T> CorrPyramid<T>::onthefly(const Tensor<T>& fi, const Tensor<T>& fj, int r) {
  check_features(fi.shape(), fj.shape(), "CorrPyramid");
  CorrPyramid p;
  p.mode_ = CorrMode::onthefly;
  p.r_ = r;
  p.fi_ = fi;
  for (int s = 0; s < kPyramidLevels; ++s) p.levels_.push_back(avg_pool2d(fj, level_stride(s)));
  return p;
}

template <Real T>
Tensor<T> CorrPyramid<T>::lookup(const Tensor<T>& coords, const std::vector<Tensor<T>>& offsets,
                                 const ContinuousMask<T>* mask) const {
  if (!offsets.empty() && offsets.size() != static_cast<std::size_t>(kPyramidLevels)) {
    throw ShapeError("CorrPyramid::lookup: need one offset tensor per level");
  }
  if (mask && mode_ == CorrMode::materialized) {
    throw ContractError("CorrPyramid::lookup: materialized volumes are masked before pooling");
  }
  const std::size_t nt = lookup_taps(r_), n = coords.dim(1) * coords.dim(2);
  Tensor<T> out({kPyramidLevels * nt, coords.dim(1), coords.dim(2)});
  for (int s = 0; s < kPyramidLevels; ++s) {
    const Tensor<T>* off = offsets.empty() ? nullptr : &offsets[static_cast<std::size_t>(s)];
    const Tensor<T> lv = mode_ == CorrMode::materialized
                             ? lookup_level(levels_[static_cast<std::size_t>(s)], coords, s, r_, off)
                             : lookup_onthefly_level(fi_, levels_[static_cast<std::size_t>(s)], coords, s, r_, off, mask);
    std::copy(lv.data().begin(), lv.data().end(), out.data().begin() + static_cast<long>(std::size_t(s) * nt * n));
  }
  return out;
}

// ---- differentiable versions ----------------------------------------------------------

template <Real T>
ad::Var<T> build_volume(const ad::Var<T>& fi, const ad::Var<T>& fj) {
  Tensor<T> vol = build_volume(fi.value(), fj.value());
  const std::size_t ii = fi.id(), ij = fj.id();
  return fi.tape()->record(std::move(vol), {fi, fj}, [ii, ij](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const Tensor<T>& a = t.value(ii);
    const Tensor<T>& b = t.value(ij);
    const Index c = Index(a.dim(0)), n1 = Index(a.dim(1) * a.dim(2)), n2 = Index(b.dim(1) * b.dim(2));
    const T scale = T(1) / std::sqrt(static_cast<T>(c));
    const CMap<T> gm(g.ptr(), n1, n2);
    if (t.requires_grad(ii)) {
      Tensor<T> ga(a.shape());
      Map<T>(ga.ptr(), c, n1).noalias() = (CMap<T>(b.ptr(), c, n2) * gm.transpose()) * scale;
      t.accumulate(ii, std::move(ga));
    }
    if (t.requires_grad(ij)) {
      Tensor<T> gb(b.shape());
      Map<T>(gb.ptr(), c, n2).noalias() = (CMap<T>(a.ptr(), c, n1) * gm) * scale;
      t.accumulate(ij, std::move(gb));
    }
  });
}

template <Real T>
ad::Var<T> lookup_level(const ad::Var<T>& level, const ad::Var<T>& coords, int s, int r, const std::type_identity_t<ad::Var<T>>* offsets) {
  Tensor<T> out = lookup_level(level.value(), coords.value(), s, r, offsets ? &offsets->value() : nullptr);
  const std::size_t il = level.id(), ic = coords.id(), io = offsets ? offsets->id() : 0;
  const bool has_off = offsets != nullptr;
  std::vector<ad::Var<T>> inputs{level, coords};
  if (has_off) inputs.push_back(*offsets);
  return level.tape()->record(
      std::move(out), inputs, [il, ic, io, has_off, s, r](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
        const Tensor<T>& lv = t.value(il);
        const Tensor<T>& cv = t.value(ic);
        const Tensor<T>* ov = has_off ? &t.value(io) : nullptr;
        const std::size_t n = cv.dim(1) * cv.dim(2);
        const long h = static_cast<long>(lv.dim(2)), w = static_cast<long>(lv.dim(3));
        const bool need_lv = t.requires_grad(il);
        const bool need_c = t.requires_grad(ic);
        const bool need_o = has_off && t.requires_grad(io);
        T* gl = need_lv ? t.grad_buffer(il).ptr() : nullptr;
        Tensor<T> gc(cv.shape());
        Tensor<T> go(has_off ? ov->shape() : Shape{});
        const T inv = T(1) / T(level_stride(s));
        const TapGeometry<T> geo{cv.ptr(), ov ? ov->ptr() : nullptr, n, r, inv};
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t p = lo; p < hi; ++p) {
            const std::size_t plane = p * static_cast<std::size_t>(h * w);
            const T* img = lv.ptr() + plane;
            T* gimg = gl ? gl + plane : nullptr;
            T gx = 0, gy = 0;
            geo.for_taps(p, [&](std::size_t tap, T x, T y) {
              const T gv = g[tap * n + p];
              if (gv == T(0)) return;
              const Corners<T> k(x, y);
              Point2<T> d;
              if (k.interior(h, w)) {
                const long o = k.y0 * w + k.x0;
                const T v00 = img[o], v01 = img[o + 1], v10 = img[o + w], v11 = img[o + w + 1];
                if (gimg) {
                  gimg[o] += gv * ((T(1) - k.ay) * (T(1) - k.ax));
                  gimg[o + 1] += gv * ((T(1) - k.ay) * k.ax);
                  gimg[o + w] += gv * (k.ay * (T(1) - k.ax));
                  gimg[o + w + 1] += gv * (k.ay * k.ax);
                }
                d = {gv * ((T(1) - k.ay) * (v01 - v00) + k.ay * (v11 - v10)),
                     gv * ((T(1) - k.ax) * (v10 - v00) + k.ax * (v11 - v01))};
              } else {
                d = detail::bilinear_at_backward(img, gimg, h, w, x, y, gv);
              }
              gx += d.x;
              gy += d.y;
              if (need_o) {
                go[(2 * tap) * n + p] += d.x;
                go[(2 * tap + 1) * n + p] += d.y;
              }
            });
            gc[p] += gx * inv;
            gc[n + p] += gy * inv;
          }
        });
        if (need_c) t.accumulate(ic, std::move(gc));
        if (need_o) t.accumulate(io, std::move(go));
      });
}

template <Real T>
ad::Var<T> lookup_onthefly_level(const ad::Var<T>& fi, const ad::Var<T>& fj_pooled, const ad::Var<T>& coords, int s,
                                 int r, const std::type_identity_t<ad::Var<T>>* offsets,
                                 const std::type_identity_t<ad::Var<T>>* mu, const std::type_identity_t<ad::Var<T>>* ec, int r1,
                                 std::type_identity_t<T> scale) {
  if ((mu == nullptr) != (ec == nullptr)) throw ContractError("lookup_onthefly: mu and ec must be given together");
  const bool masked = mu != nullptr;
  ContinuousMask<T> m{masked ? &mu->value() : nullptr, masked ? &ec->value() : nullptr, r1, scale};
  Tensor<T> out = lookup_onthefly_level(fi.value(), fj_pooled.value(), coords.value(), s, r,
                                        offsets ? &offsets->value() : nullptr, masked ? &m : nullptr);
  const bool has_off = offsets != nullptr;
  const std::size_t ii = fi.id(), ij = fj_pooled.id(), ic = coords.id(), io = has_off ? offsets->id() : 0;
  const std::size_t imu = masked ? mu->id() : 0, iec = masked ? ec->id() : 0;
  std::vector<ad::Var<T>> inputs{fi, fj_pooled, coords};
  if (has_off) inputs.push_back(*offsets);
  if (masked) {
    inputs.push_back(*mu);
    inputs.push_back(*ec);
  }
  return fi.tape()->record(std::move(out), inputs, [=](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const Tensor<T>& a = t.value(ii);
    const Tensor<T>& b = t.value(ij);
    const Tensor<T>& cv = t.value(ic);
    const Tensor<T>* ov = has_off ? &t.value(io) : nullptr;
    const std::size_t c = a.dim(0), n = a.dim(1) * a.dim(2), nt = lookup_taps(r);
    const long h = static_cast<long>(b.dim(1)), w = static_cast<long>(b.dim(2));
    const T rs = T(1) / std::sqrt(static_cast<T>(c));
    const RowMat<T> am = pixel_major(a, rs);
    const RowMat<T> bm = pixel_major(b, T(1));
    RowMat<T> ga = RowMat<T>::Zero(Index(n), Index(c));
    RowMat<T> gb = RowMat<T>::Zero(Index(h * w), Index(c));
    Tensor<T> gc(cv.shape());
    Tensor<T> go(has_off ? ov->shape() : Shape{});
    Tensor<T> gmu(masked ? t.value(imu).shape() : Shape{});
    Tensor<T> gec(masked ? t.value(iec).shape() : Shape{});
    const T stride = T(level_stride(s));
    const TapGeometry<T> geo{cv.ptr(), ov ? ov->ptr() : nullptr, n, r, T(1) / stride};
    // Serial: target-feature gradients scatter across pixels, so a fixed order keeps it deterministic.
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t tap = 0; tap < nt; ++tap) {
        const T gv = g[tap * n + p];
        if (gv == T(0)) continue;
        const auto q = geo.at(p, tap);
        const T fx = std::floor(q.x), fy = std::floor(q.y);
        const long x0 = static_cast<long>(fx), y0 = static_cast<long>(fy);
        const T ax = q.x - fx, ay = q.y - fy;
        const long cx[4] = {x0, x0 + 1, x0, x0 + 1};
        const long cy[4] = {y0, y0, y0 + 1, y0 + 1};
        const T wt[4] = {(T(1) - ay) * (T(1) - ax), (T(1) - ay) * ax, ay * (T(1) - ax), ay * ax};
        T d[4];
        bool in[4];
        T base = 0;
        for (int k = 0; k < 4; ++k) {
          in[k] = cy[k] >= 0 && cy[k] < h && cx[k] >= 0 && cx[k] < w;
          d[k] = in[k] ? am.row(Index(p)).dot(bm.row(Index(cy[k] * w + cx[k]))) : T(0);
          base += wt[k] * d[k];
        }
        MaskEval<T> me;
        if (masked) me = eval_mask(t.value(imu).ptr(), t.value(iec).ptr(), n, p, r1, scale, stride, q.x, q.y);
        const T gbase = gv * me.factor;
        for (int k = 0; k < 4; ++k) {
          if (!in[k]) continue;
          const Index tgt = Index(cy[k] * w + cx[k]);
          ga.row(Index(p)) += (gbase * wt[k] * rs) * bm.row(tgt);
          gb.row(tgt) += (gbase * wt[k]) * am.row(Index(p));
        }
        T dx = gbase * ((T(1) - ay) * (d[1] - d[0]) + ay * (d[3] - d[2]));
        T dy = gbase * ((T(1) - ax) * (d[2] - d[0]) + ax * (d[3] - d[1]));
        if (masked && me.inside) {
          const T k = gv * base * me.m;  // d(out)/d(log density) before the chain rule
          dx += -k * me.dx0 / me.c0 * stride;
          dy += -k * me.dy0 / me.c1 * stride;
          gmu[p] += k * me.dx0 / me.c0;
          gmu[n + p] += k * me.dy0 / me.c1;
          gec[p] += k * (me.dx0 * me.dx0 / (T(2) * me.c0 * me.c0) - T(1) / (T(2) * me.c0));
          gec[n + p] += k * (me.dy0 * me.dy0 / (T(2) * me.c1 * me.c1) - T(1) / (T(2) * me.c1));
        }
        gc[p] += dx / stride;
        gc[n + p] += dy / stride;
        if (has_off) {
          go[(2 * tap) * n + p] += dx;
          go[(2 * tap + 1) * n + p] += dy;
        }
      }
    }
    if (t.requires_grad(ii)) {
      Tensor<T> gat(a.shape());
      Map<T>(gat.ptr(), Index(c), Index(n)) = ga.transpose();
      t.accumulate(ii, std::move(gat));
    }
    if (t.requires_grad(ij)) {
      Tensor<T> gbt(b.shape());
      Map<T>(gbt.ptr(), Index(c), Index(h * w)) = gb.transpose();
      t.accumulate(ij, std::move(gbt));
    }
    t.accumulate(ic, std::move(gc));
    if (has_off) t.accumulate(io, std::move(go));
    if (masked) {
      t.accumulate(imu, std::move(gmu));
      t.accumulate(iec, std::move(gec));
    }
  });
}

#define LGU_INSTANTIATE_CORR(T)                                                                                   \
  template Tensor<T> build_volume(const Tensor<T>&, const Tensor<T>&);                                          \
  template std::vector<Tensor<T>> volume_pyramid(const Tensor<T>&);                                             \
  template Tensor<T> lookup_level(const Tensor<T>&, const Tensor<T>&, int, int, const Tensor<T>*);              \
  template Tensor<T> lookup_onthefly_level(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int,      \
                                           const Tensor<T>*, const ContinuousMask<T>*);                         \
  template class CorrPyramid<T>;                                                                                \
  template ad::Var<T> build_volume(const ad::Var<T>&, const ad::Var<T>&);                                       \
  template ad::Var<T> lookup_level(const ad::Var<T>&, const ad::Var<T>&, int, int, const ad::Var<T>*);          \
  template ad::Var<T> lookup_onthefly_level(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&, int, int,  \
                                            const ad::Var<T>*, const ad::Var<T>*, const ad::Var<T>*, int, T);

LGU_INSTANTIATE_CORR(float)
LGU_INSTANTIATE_CORR(double)

}  // namespace lgu
