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

#include "lgu/gaussian.hpp"

#include <cmath>

#include "lgu/layers.hpp"
#include "lgu/parallel.hpp"

namespace lgu {

int truncation_radius(std::size_t h, std::size_t w) {
  return std::max(1, static_cast<int>(std::lround(static_cast<double>(h + w) / 16.0)));
}

template <Real T>
void init_gaussian_encoder(ad::ParamStore<T>& store, const std::string& prefix, std::size_t channels,
                           std::mt19937_64& rng) {
  init_conv(store, prefix + ".enc", 2 * channels, 2 * channels, 1, rng);
  init_conv(store, prefix + ".res", 2, 2 * channels, 1, rng, 0.1);
  init_conv(store, prefix + ".cov", 2, 2 * channels, 1, rng, 0.1);
}

template <Real T>
GaussianRaw<T> encode_gaussian(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix,
                               const ad::Var<T>& fi, const ad::Var<T>& fj) {
  if (fi.shape() != fj.shape()) {
    throw ShapeError("encode_gaussian: feature shapes differ: " + shape_str(fi.shape()) + " vs " + shape_str(fj.shape()));
  }
  auto hidden = ad::gelu(conv(tape, store, prefix + ".enc", ad::concat<T>({fi, fj})));
  return {conv(tape, store, prefix + ".res", hidden), conv(tape, store, prefix + ".cov", hidden)};
}

template <Real T>
ad::Var<T> normalize_covariance(const ad::Var<T>& raw, const GaussianConfig& cfg) {
  return bounded_sigmoid(norm_corr(raw, cfg.eps), cfg.beta, cfg.alpha + cfg.beta);
}

namespace {

void check_fields(const Shape& mu, const Shape& ec, const Shape& p) {
  if (mu.size() != 3 || mu[0] != 2 || ec != mu || p != mu) {
    throw ShapeError("density: need mu, ec, P of shape [2,H,W], got " + shape_str(mu) + ", " + shape_str(ec) + ", " +
                     shape_str(p));
  }
}

template <Real T>
void check_positive(const Tensor<T>& ec) {
  for (T v : ec.data()) {
    if (!(v > 0)) throw ContractError("density: covariance entries must be positive");
  }
}

}  // namespace

template <Real T>
Tensor<T> density(const Tensor<T>& mu, const Tensor<T>& ec, const Tensor<T>& p) {
  check_fields(mu.shape(), ec.shape(), p.shape());
  check_positive(ec);
  const std::size_t n = mu.dim(1) * mu.dim(2);
  Tensor<T> out({mu.dim(1), mu.dim(2)});
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = gaussian_density(p[i] - mu[i], p[n + i] - mu[n + i], ec[i], ec[n + i]);
  }
  return out;
}

template <Real T>
ad::Var<T> density(const ad::Var<T>& mu, const ad::Var<T>& ec, const ad::Var<T>& p) {
  Tensor<T> out = density(mu.value(), ec.value(), p.value());
  const std::size_t im = mu.id(), ie = ec.id(), ip = p.id();
  return mu.tape()->record(std::move(out), {mu, ec, p},
                           [im, ie, ip](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>& f) {
                             const Tensor<T>& m = t.value(im);
                             const Tensor<T>& c = t.value(ie);
                             const Tensor<T>& q = t.value(ip);
                             const std::size_t n = f.numel();
                             Tensor<T> gm(m.shape()), gc(c.shape()), gp(q.shape());
                             for (std::size_t i = 0; i < n; ++i) {
                               for (std::size_t d = 0; d < 2; ++d) {
                                 const std::size_t k = d * n + i;
                                 const T diff = q[k] - m[k];
                                 const T gf = g[i] * f[i];
                                 gm[k] = gf * diff / c[k];
                                 gp[k] = -gm[k];
                                 gc[k] = gf * (diff * diff / (T(2) * c[k] * c[k]) - T(1) / (T(2) * c[k]));
                               }
                             }
                             t.accumulate(im, std::move(gm));
                             t.accumulate(ie, std::move(gc));
                             t.accumulate(ip, std::move(gp));
                           });
}

template <Real T>
GaussianMask<T> build_mask(const Tensor<T>& mu, const Tensor<T>& ec, int r1, double scale) {
  check_fields(mu.shape(), ec.shape(), mu.shape());
  check_positive(ec);
  if (r1 < 0) throw ContractError("build_mask: negative radius");
  const std::size_t n = mu.dim(1) * mu.dim(2), d = static_cast<std::size_t>(2 * r1 + 1);
  GaussianMask<T> m{r1, Tensor<T>(mu.shape()), Tensor<T>({d * d, mu.dim(1), mu.dim(2)})};
  const T s = static_cast<T>(scale);
  for (std::size_t i = 0; i < n; ++i) {
    const T ax = std::round(mu[i]), ay = std::round(mu[n + i]);
    m.anchor[i] = ax;
    m.anchor[n + i] = ay;
    for (int dy = -r1; dy <= r1; ++dy) {
      for (int dx = -r1; dx <= r1; ++dx) {
        const std::size_t k = static_cast<std::size_t>((dy + r1) * (2 * r1 + 1) + (dx + r1));
        m.values[k * n + i] = s * gaussian_density(ax + T(dx) - mu[i], ay + T(dy) - mu[n + i], ec[i], ec[n + i]);
      }
    }
  }
  return m;
}

namespace {

void check_volume(const Shape& vol, const Shape& field) {
  if (vol.size() != 4 || field.size() != 3 || vol[0] != field[1] || vol[1] != field[2]) {
    throw ShapeError("apply_mask: volume " + shape_str(vol) + " does not match field " + shape_str(field));
  }
}

// Calls fn(flat volume index, window index) for every window cell of pixel p inside the volume.
template <typename Fn>
void for_window(std::size_t p, long ax, long ay, int r1, long h2, long w2, Fn&& fn) {
  const std::size_t base = p * static_cast<std::size_t>(h2 * w2);
  for (int dy = -r1; dy <= r1; ++dy) {
    const long y = ay + dy;
    if (y < 0 || y >= h2) continue;
    for (int dx = -r1; dx <= r1; ++dx) {
      const long x = ax + dx;
      if (x < 0 || x >= w2) continue;
      fn(base + static_cast<std::size_t>(y * w2 + x), static_cast<std::size_t>((dy + r1) * (2 * r1 + 1) + (dx + r1)),
         dx, dy);
    }
  }
}

}  // namespace

template <Real T>
Tensor<T> apply_mask(const Tensor<T>& vol, const GaussianMask<T>& mask) {
  check_volume(vol.shape(), mask.anchor.shape());
  const std::size_t n = vol.dim(0) * vol.dim(1);
  const long h2 = static_cast<long>(vol.dim(2)), w2 = static_cast<long>(vol.dim(3));
  Tensor<T> out = vol;
  parallel_for(n, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      for_window(p, static_cast<long>(mask.anchor[p]), static_cast<long>(mask.anchor[n + p]), mask.r1, h2, w2,
                 [&](std::size_t idx, std::size_t k, int, int) { out[idx] *= T(1) + mask.values[k * n + p]; });
    }
  });
  return out;
}

template <Real T>
ad::Var<T> apply_mask(const ad::Var<T>& vol, const ad::Var<T>& mu, const ad::Var<T>& ec, int r1, double scale) {
  check_volume(vol.shape(), mu.shape());
  GaussianMask<T> mask = build_mask(mu.value(), ec.value(), r1, scale);
  Tensor<T> out = apply_mask(vol.value(), mask);
  const std::size_t iv = vol.id(), im = mu.id(), ie = ec.id();
  return vol.tape()->record(
      std::move(out), {vol, mu, ec},
      [iv, im, ie, r1, mask = std::move(mask)](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
        const Tensor<T>& v = t.value(iv);
        const Tensor<T>& m = t.value(im);
        const Tensor<T>& c = t.value(ie);
        const std::size_t n = v.dim(0) * v.dim(1);
        const long h2 = static_cast<long>(v.dim(2)), w2 = static_cast<long>(v.dim(3));
        if (t.requires_grad(iv)) {
          Tensor<T>& gv = t.grad_buffer(iv);
          for (std::size_t i = 0; i < g.numel(); ++i) gv[i] += g[i];
          parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t p = lo; p < hi; ++p) {
              for_window(p, long(mask.anchor[p]), long(mask.anchor[n + p]), r1, h2, w2,
                         [&](std::size_t idx, std::size_t k, int, int) { gv[idx] += g[idx] * mask.values[k * n + p]; });
            }
          });
        }
        if (!t.requires_grad(im) && !t.requires_grad(ie)) return;
        Tensor<T> gm(m.shape()), gc(c.shape());
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
          for (std::size_t p = lo; p < hi; ++p) {
            const T ax = mask.anchor[p], ay = mask.anchor[n + p];
            for_window(p, long(ax), long(ay), r1, h2, w2, [&](std::size_t idx, std::size_t k, int dx, int dy) {
              // d(out)/dM = g * vol; dM/dtheta = M * dlog(density)/dtheta.
              const T gmv = g[idx] * v[idx] * mask.values[k * n + p];
              const T ex = ax + T(dx) - m[p], ey = ay + T(dy) - m[n + p];
              gm[p] += gmv * ex / c[p];
              gm[n + p] += gmv * ey / c[n + p];
              gc[p] += gmv * (ex * ex / (T(2) * c[p] * c[p]) - T(1) / (T(2) * c[p]));
              gc[n + p] += gmv * (ey * ey / (T(2) * c[n + p] * c[n + p]) - T(1) / (T(2) * c[n + p]));
            });
          }
        });
        t.accumulate(im, std::move(gm));
        t.accumulate(ie, std::move(gc));
      });
}

#define LGU_INSTANTIATE_GAUSSIAN(T)                                                                                 \
  template void init_gaussian_encoder(ad::ParamStore<T>&, const std::string&, std::size_t, std::mt19937_64&);      \
  template GaussianRaw<T> encode_gaussian(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&, const ad::Var<T>&, \
                                          const ad::Var<T>&);                                                      \
  template ad::Var<T> normalize_covariance(const ad::Var<T>&, const GaussianConfig&);                              \
  template Tensor<T> density(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                                \
  template ad::Var<T> density(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&);                            \
  template GaussianMask<T> build_mask(const Tensor<T>&, const Tensor<T>&, int, double);                            \
  template Tensor<T> apply_mask(const Tensor<T>&, const GaussianMask<T>&);                                         \
  template ad::Var<T> apply_mask(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&, int, double);

LGU_INSTANTIATE_GAUSSIAN(float)
LGU_INSTANTIATE_GAUSSIAN(double)

}  // namespace lgu
