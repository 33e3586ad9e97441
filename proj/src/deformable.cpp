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

#include "lgu/deformable.hpp"

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <memory>

#include "lgu/gaussian.hpp"
#include "lgu/layers.hpp"
#include "lgu/ops.hpp"

namespace lgu {

template <Real T>
CorrPyramidVar<T> pyramid_from_volume(const ad::Var<T>& vol, int r) {
  if (vol.shape().size() != 4) throw ShapeError("pyramid_from_volume: need [H,W,H2,W2], got " + shape_str(vol.shape()));
  CorrPyramidVar<T> p;
  p.mode = CorrMode::materialized;
  p.r = r;
  p.levels.push_back(vol);
  for (int s = 1; s < kPyramidLevels; ++s) p.levels.push_back(ad::avg_pool2d(vol, level_stride(s)));
  return p;
}

namespace {

template <Real T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <Real T>
using CMap = Eigen::Map<const RowMat<T>>;
template <Real T>
using Map = Eigen::Map<RowMat<T>>;
using Index = Eigen::Index;

// State shared by the level nodes of one masked pyramid.
template <Real T>
struct WindowTerms {
  GaussianMask<T> mask;
  Tensor<T> corr;  // unmasked correlation at each window cell, [(2r1+1)^2, H, W]
  Tensor<T> valid;  // 1 where the window cell lies inside the grid
};

template <Real T>
RowMat<T> pixel_major(const Tensor<T>& f) {
  return CMap<T>(f.ptr(), Index(f.dim(0)), Index(f.dim(1) * f.dim(2))).transpose();
}

// Calls fn(window index, level-0 cell y, x) for the in-grid window cells of pixel p.
template <Real T, typename Fn>
void for_window_cells(const GaussianMask<T>& m, std::size_t n, std::size_t p, long h, long w, Fn&& fn) {
  const int r1 = m.r1;
  const long ax = static_cast<long>(m.anchor[p]), ay = static_cast<long>(m.anchor[n + p]);
  for (int dy = -r1; dy <= r1; ++dy) {
    const long y = ay + dy;
    if (y < 0 || y >= h) continue;
    for (int dx = -r1; dx <= r1; ++dx) {
      const long x = ax + dx;
      if (x < 0 || x >= w) continue;
      fn(static_cast<std::size_t>((dy + r1) * (2 * r1 + 1) + (dx + r1)), y, x, dx, dy);
    }
  }
}

template <Real T>
std::shared_ptr<WindowTerms<T>> window_terms(const Tensor<T>& fi, const Tensor<T>& fj, const Tensor<T>& mu,
                                             const Tensor<T>& ec, int r1, double scale) {
  auto wt = std::make_shared<WindowTerms<T>>();
  wt->mask = build_mask(mu, ec, r1, scale);
  const std::size_t c = fi.dim(0), n = fi.dim(1) * fi.dim(2), cells = wt->mask.values.dim(0);
  const long h = static_cast<long>(fj.dim(1)), w = static_cast<long>(fj.dim(2));
  wt->corr = Tensor<T>({cells, fi.dim(1), fi.dim(2)});
  const RowMat<T> a = pixel_major(fi), b = pixel_major(fj);
  const T cs = T(1) / std::sqrt(static_cast<T>(c));
  for (std::size_t p = 0; p < n; ++p) {
    for_window_cells(wt->mask, n, p, h, w, [&](std::size_t k, long y, long x, int, int) {
      wt->corr[k * n + p] = a.row(Index(p)).dot(b.row(Index(y * w + x))) * cs;
    });
  }
  return wt;
}

// Level s of the (masked) volume pyramid as one tape node.
template <Real T>
ad::Var<T> volume_level(const ad::Var<T>& fi, const ad::Var<T>& fj, int s, const ad::Var<T>* mu,
                        const ad::Var<T>* ec, std::shared_ptr<WindowTerms<T>> wt) {
  const int st = level_stride(s);
  const Tensor<T>& a = fi.value();
  const std::size_t c = a.dim(0), n = a.dim(1) * a.dim(2);
  const long h = static_cast<long>(fj.value().dim(1)), w = static_cast<long>(fj.value().dim(2));
  const long hs = h / st, ws = w / st;
  const std::size_t ns = static_cast<std::size_t>(hs * ws);
  const T cs = T(1) / std::sqrt(static_cast<T>(c)), inv_area = T(1) / T(st * st);
  const Tensor<T> pf = avg_pool2d(fj.value(), st);
  Tensor<T> out({a.dim(1), a.dim(2), static_cast<std::size_t>(hs), static_cast<std::size_t>(ws)});
  Map<T> om(out.ptr(), Index(n), Index(ns));
  om.noalias() = CMap<T>(a.ptr(), Index(c), Index(n)).transpose() * CMap<T>(pf.ptr(), Index(c), Index(ns));
  om *= cs;
  if (wt) {
    const auto& m = wt->mask.values;
    for (std::size_t p = 0; p < n; ++p) {
      T* row = out.ptr() + p * ns;
      for_window_cells(wt->mask, n, p, h, w, [&](std::size_t k, long y, long x, int, int) {
        row[(y / st) * ws + x / st] += wt->corr[k * n + p] * m[k * n + p] * inv_area;
      });
    }
  }
  std::vector<ad::Var<T>> inputs{fi, fj};
  if (wt) {
    inputs.push_back(*mu);
    inputs.push_back(*ec);
  }
  const std::size_t ii = fi.id(), ij = fj.id(), im = mu ? mu->id() : 0, ie = ec ? ec->id() : 0;
  return fi.tape()->record(std::move(out), inputs, [=](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const Tensor<T>& av = t.value(ii);
    const Tensor<T>& bv = t.value(ij);
    const Tensor<T> pfv = avg_pool2d(bv, st);
    const RowMat<T> at = pixel_major(av), bt = pixel_major(bv), pt = pixel_major(pfv);
    RowMat<T> ga = RowMat<T>::Zero(Index(n), Index(c));
    RowMat<T> gp = RowMat<T>::Zero(Index(ns), Index(c));
    RowMat<T> gb = RowMat<T>::Zero(Index(h * w), Index(c));
    std::size_t nnz = 0;
    for (T v : g.data()) nnz += v != T(0) ? 1 : 0;
    const CMap<T> gm(g.ptr(), Index(n), Index(ns));
    if (nnz * 4 > g.numel()) {
      ga.noalias() = gm * pt;
      gp.noalias() = gm.transpose() * at;
      ga *= cs;
      gp *= cs;
    } else {
      // Lookups touch few cells per pixel: scatter only the nonzero gradients.
      for (std::size_t p = 0; p < n; ++p) {
        const T* gr = g.ptr() + p * ns;
        for (std::size_t q = 0; q < ns; ++q) {
          if (gr[q] == T(0)) continue;
          const T k = gr[q] * cs;
          ga.row(Index(p)) += k * pt.row(Index(q));
          gp.row(Index(q)) += k * at.row(Index(p));
        }
      }
    }
    Tensor<T> gmu, gec;
    if (wt) {
      const Tensor<T>& muv = t.value(im);
      const Tensor<T>& ecv = t.value(ie);
      const auto& mv = wt->mask.values;
      gmu = Tensor<T>(muv.shape());
      gec = Tensor<T>(ecv.shape());
      for (std::size_t p = 0; p < n; ++p) {
        const T* gr = g.ptr() + p * ns;
        const T ax = wt->mask.anchor[p], ay = wt->mask.anchor[n + p];
        const T c0 = ecv[p], c1 = ecv[n + p];
        for_window_cells(wt->mask, n, p, h, w, [&](std::size_t k, long y, long x, int dx, int dy) {
          const T gg = gr[(y / st) * ws + x / st] * inv_area;
          if (gg == T(0)) return;
          const T mk = mv[k * n + p], vk = wt->corr[k * n + p];
          const T dv = gg * mk * cs;
          const Index q = Index(y * w + x);
          ga.row(Index(p)) += dv * bt.row(q);
          gb.row(q) += dv * at.row(Index(p));
          // d(out)/dM = gg * v; dM/dtheta = M * dlog(density)/dtheta.
          const T gmv = gg * vk * mk;
          const T ex = ax + T(dx) - muv[p], ey = ay + T(dy) - muv[n + p];
          gmu[p] += gmv * ex / c0;
          gmu[n + p] += gmv * ey / c1;
          gec[p] += gmv * (ex * ex / (T(2) * c0 * c0) - T(1) / (T(2) * c0));
          gec[n + p] += gmv * (ey * ey / (T(2) * c1 * c1) - T(1) / (T(2) * c1));
        });
      }
    }
    if (t.requires_grad(ii)) {
      Tensor<T> gat(av.shape());
      Map<T>(gat.ptr(), Index(c), Index(n)) = ga.transpose();
      t.accumulate(ii, std::move(gat));
    }
    if (t.requires_grad(ij)) {
      Tensor<T> gpt(pfv.shape());
      Map<T>(gpt.ptr(), Index(c), Index(ns)) = gp.transpose();
      Tensor<T> gbt = avg_pool2d_backward(gpt, bv.shape(), st);
      Map<T>(gbt.ptr(), Index(c), Index(h * w)) += gb.transpose();
      t.accumulate(ij, std::move(gbt));
    }
    if (wt) {
      t.accumulate(im, std::move(gmu));
      t.accumulate(ie, std::move(gec));
    }
  });
}

}  // namespace

template <Real T>
CorrPyramidVar<T> pyramid_materialized(const ad::Var<T>& fi, const ad::Var<T>& fj, int r,
                                       const std::type_identity_t<ad::Var<T>>* mu,
                                       const std::type_identity_t<ad::Var<T>>* ec, int r1, double scale) {
  const Shape& a = fi.shape();
  const Shape& b = fj.shape();
  if (a.size() != 3 || b.size() != 3 || a[0] != b[0]) {
    throw ShapeError("pyramid_materialized: incompatible features " + shape_str(a) + ", " + shape_str(b));
  }
  if ((mu == nullptr) != (ec == nullptr)) throw ContractError("pyramid_materialized: mu and ec must be given together");
  std::shared_ptr<WindowTerms<T>> wt;
  if (mu) {
    if (mu->shape() != Shape{2, a[1], a[2]} || ec->shape() != mu->shape()) {
      throw ShapeError("pyramid_materialized: mu and ec must be [2,H,W], got " + shape_str(mu->shape()) + ", " +
                       shape_str(ec->shape()));
    }
    wt = window_terms(fi.value(), fj.value(), mu->value(), ec->value(), r1, scale);
  }
  CorrPyramidVar<T> p;
  p.mode = CorrMode::materialized;
  p.r = r;
  for (int s = 0; s < kPyramidLevels; ++s) {
    if (b[1] % static_cast<std::size_t>(level_stride(s)) != 0 || b[2] % static_cast<std::size_t>(level_stride(s)) != 0) {
      throw ShapeError("pyramid_materialized: target grid " + shape_str(b) + " not divisible by " +
                       std::to_string(level_stride(s)));
    }
    p.levels.push_back(volume_level(fi, fj, s, mu, ec, wt));
  }
  return p;
}

template <Real T>
CorrPyramidVar<T> pyramid_onthefly(const ad::Var<T>& fi, const ad::Var<T>& fj, int r) {
  if (fi.shape().size() != 3 || fj.shape().size() != 3 || fi.shape()[0] != fj.shape()[0]) {
    throw ShapeError("pyramid_onthefly: incompatible features " + shape_str(fi.shape()) + ", " + shape_str(fj.shape()));
  }
  CorrPyramidVar<T> p;
  p.mode = CorrMode::onthefly;
  p.r = r;
  p.fi = fi;
  p.levels.push_back(fj);
  for (int s = 1; s < kPyramidLevels; ++s) p.levels.push_back(ad::avg_pool2d(fj, level_stride(s)));
  return p;
}

namespace {

template <Real T>
ad::Var<T> lookup_impl(const CorrPyramidVar<T>& pyr, const ad::Var<T>& coords, const std::vector<ad::Var<T>>* offsets) {
  if (offsets && offsets->size() != static_cast<std::size_t>(kPyramidLevels)) {
    throw ShapeError("deformable_lookup: need one offset field per level");
  }
  std::vector<ad::Var<T>> parts;
  for (int s = 0; s < kPyramidLevels; ++s) {
    const ad::Var<T>* off = offsets ? &(*offsets)[static_cast<std::size_t>(s)] : nullptr;
    const auto& level = pyr.levels[static_cast<std::size_t>(s)];
    if (pyr.mode == CorrMode::materialized) {
      parts.push_back(lookup_level(level, coords, s, pyr.r, off));
    } else if (pyr.masked) {
      parts.push_back(lookup_onthefly_level(pyr.fi, level, coords, s, pyr.r, off, &pyr.mu, &pyr.ec, pyr.r1, pyr.mask_scale));
    } else {
      parts.push_back(lookup_onthefly_level(pyr.fi, level, coords, s, pyr.r, off));
    }
  }
  return ad::concat(parts);
}

}  // namespace

template <Real T>
ad::Var<T> lookup_fixed(const CorrPyramidVar<T>& pyr, const ad::Var<T>& coords) {
  return lookup_impl<T>(pyr, coords, nullptr);
}

template <Real T>
ad::Var<T> deformable_lookup(const CorrPyramidVar<T>& pyr, const ad::Var<T>& coords,
                             const std::vector<ad::Var<T>>& offsets) {
  return lookup_impl(pyr, coords, &offsets);
}

template <Real T>
void init_offset_decoders(ad::ParamStore<T>& store, const std::string& prefix, std::size_t channels, int r,
                          std::mt19937_64& rng) {
  const std::size_t out = 2 * lookup_taps(r);
  init_conv(store, prefix + ".top", out, 2 * channels, 3, rng);
  init_conv(store, prefix + ".res", out, 2 * channels, 3, rng);
}

template <Real T>
OffsetPair<T> decode_offsets(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix,
                             const ad::Var<T>& fi, const ad::Var<T>& fj, double eps, double bound) {
  if (fi.shape() != fj.shape() || fi.shape().size() != 3) {
    throw ShapeError("decode_offsets: feature shapes differ: " + shape_str(fi.shape()) + " vs " + shape_str(fj.shape()));
  }
  if (fi.shape()[1] % 2 != 0 || fi.shape()[2] % 2 != 0) {
    throw ShapeError("decode_offsets: grid must have even sides, got " + shape_str(fi.shape()));
  }
  const auto f = ad::concat<T>({fi, fj});
  auto top = bounded_tanh(norm_corr(conv(tape, store, prefix + ".top", f), eps), bound);
  auto res =
      bounded_tanh(norm_corr(ad::upsample2x(conv(tape, store, prefix + ".res", ad::avg_pool2d(f, 2))), eps), bound);
  return {top, res};
}

template <Real T>
ad::Var<T> compose_scale_offsets(const ad::Var<T>& top, const ad::Var<T>& res, int s) {
  if (s < 0 || s >= kPyramidLevels) throw ContractError("compose_scale_offsets: level out of range");
  return ad::scale(ad::add(top, res), T(1) / T(level_stride(s)));
}

template <Real T>
ad::Var<T> tap_variance(const ad::Var<T>& lookup, std::size_t levels) {
  const Shape& sh = lookup.shape();
  if (sh.size() != 3 || levels == 0 || sh[0] % levels != 0 || sh[0] == 0) {
    throw ShapeError("tap_variance: need [L*T, H, W], got " + shape_str(sh));
  }
  const std::size_t taps = sh[0] / levels, n = sh[1] * sh[2];
  const Tensor<T>& x = lookup.value();
  // Channel-major passes: per-level means, then squared deviations.
  Tensor<T> means({levels, n});
  for (std::size_t l = 0; l < levels; ++l) {
    T* m = means.ptr() + l * n;
    for (std::size_t t = 0; t < taps; ++t) {
      const T* row = x.ptr() + (l * taps + t) * n;
      for (std::size_t p = 0; p < n; ++p) m[p] += row[p];
    }
    for (std::size_t p = 0; p < n; ++p) m[p] /= T(taps);
  }
  Tensor<T> var({sh[1], sh[2]});
  std::vector<T> lv(n);
  for (std::size_t l = 0; l < levels; ++l) {
    std::fill(lv.begin(), lv.end(), T(0));
    const T* m = means.ptr() + l * n;
    for (std::size_t t = 0; t < taps; ++t) {
      const T* row = x.ptr() + (l * taps + t) * n;
      for (std::size_t p = 0; p < n; ++p) {
        const T d = row[p] - m[p];
        lv[p] += d * d;
      }
    }
    for (std::size_t p = 0; p < n; ++p) var[p] += lv[p] / T(taps);
  }
  for (std::size_t p = 0; p < n; ++p) var[p] /= T(levels);
  const std::size_t ix = lookup.id();
  return lookup.tape()->record(
      std::move(var), {lookup},
      [ix, levels, taps, n, means = std::move(means)](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
        const Tensor<T>& xv = t.value(ix);
        Tensor<T> gx(xv.shape());
        const T k = T(2) / T(taps * levels);
        for (std::size_t l = 0; l < levels; ++l) {
          const T* m = means.ptr() + l * n;
          for (std::size_t q = 0; q < taps; ++q) {
            const std::size_t o = (l * taps + q) * n;
            for (std::size_t p = 0; p < n; ++p) gx[o + p] = g[p] * k * (xv[o + p] - m[p]);
          }
        }
        t.accumulate(ix, std::move(gx));
      });
}

template <Real T>
ad::Var<T> uncertainty_gate(const ad::Var<T>& fixed_lookup) {
  const double below_one = static_cast<double>(std::nextafter(T(1), T(0)));
  return clamp_passthrough(ad::sigmoid(tap_variance(fixed_lookup)), 0.0, below_one);
}

template <Real T>
std::vector<ad::Var<T>> gated_offsets(const OffsetPair<T>& off, const ad::Var<T>& gate) {
  const auto top = ad::mul_channels(off.top, gate), res = ad::mul_channels(off.res, gate);
  std::vector<ad::Var<T>> out;
  for (int s = 0; s < kPyramidLevels; ++s) out.push_back(compose_scale_offsets(top, res, s));
  return out;
}

#define LGU_INSTANTIATE_DEFORMABLE(T)                                                                              \
  template CorrPyramidVar<T> pyramid_from_volume(const ad::Var<T>&, int);                                          \
  template CorrPyramidVar<T> pyramid_onthefly(const ad::Var<T>&, const ad::Var<T>&, int);                          \
  template CorrPyramidVar<T> pyramid_materialized(const ad::Var<T>&, const ad::Var<T>&, int, const ad::Var<T>*,     \
                                                  const ad::Var<T>*, int, double);                                 \
  template ad::Var<T> lookup_fixed(const CorrPyramidVar<T>&, const ad::Var<T>&);                                   \
  template ad::Var<T> deformable_lookup(const CorrPyramidVar<T>&, const ad::Var<T>&,                               \
                                        const std::vector<ad::Var<T>>&);                                           \
  template void init_offset_decoders(ad::ParamStore<T>&, const std::string&, std::size_t, int, std::mt19937_64&); \
  template OffsetPair<T> decode_offsets(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&, const ad::Var<T>&,  \
                                        const ad::Var<T>&, double, double);                                        \
  template ad::Var<T> compose_scale_offsets(const ad::Var<T>&, const ad::Var<T>&, int);                            \
  template ad::Var<T> tap_variance(const ad::Var<T>&, std::size_t);                                                \
  template ad::Var<T> uncertainty_gate(const ad::Var<T>&);                                                         \
  template std::vector<ad::Var<T>> gated_offsets(const OffsetPair<T>&, const ad::Var<T>&);

LGU_INSTANTIATE_DEFORMABLE(float)
LGU_INSTANTIATE_DEFORMABLE(double)

}  // namespace lgu
