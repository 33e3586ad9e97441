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

#include "lgu/temporal.hpp"

#include <algorithm>
#include <cmath>

#include "lgu/layers.hpp"
#include "lgu/parallel.hpp"

namespace lgu {

namespace {

constexpr double kKnotStep = 2.0 / kSplineIntervals;

}  // namespace

template <Real T>
SplineSupport<T> spline_support(T x) {
  const T xc = std::clamp(x, T(-1), T(1));
  const T pos = (xc + T(1)) / T(kKnotStep);
  const int j = std::clamp(static_cast<int>(std::floor(pos)), 0, kSplineIntervals - 1);
  const T u = pos - T(j), u2 = u * u, u3 = u2 * u, v = T(1) - u;
  SplineSupport<T> s;
  s.first = static_cast<std::size_t>(j);
  s.value = {v * v * v / T(6), (T(3) * u3 - T(6) * u2 + T(4)) / T(6), (T(-3) * u3 + T(3) * u2 + T(3) * u + T(1)) / T(6),
             u3 / T(6)};
  const T k = T(1) / T(kKnotStep);
  s.slope = {-v * v / T(2) * k, (T(3) * u2 - T(4) * u) / T(2) * k, (T(-3) * u2 + T(2) * u + T(1)) / T(2) * k,
             u2 / T(2) * k};
  return s;
}

template <Real T>
ad::Var<T> kan_activation(const ad::Var<T>& u, const ad::Var<T>& base, const ad::Var<T>& coef) {
  const Shape& sh = u.shape();
  if (sh.size() != 3 || base.shape() != Shape{sh[0]} || coef.shape() != Shape{sh[0], kSplineBases}) {
    throw ShapeError("kan_activation: got u " + shape_str(sh) + ", base " + shape_str(base.shape()) + ", coef " +
                     shape_str(coef.shape()));
  }
  const std::size_t d = sh[0], n = sh[1] * sh[2];
  const Tensor<T>& uv = u.value();
  const Tensor<T>& bv = base.value();
  const Tensor<T>& cv = coef.value();
  Tensor<T> out(sh);
  parallel_for(d, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t c = lo; c < hi; ++c) {
      const T* cf = cv.ptr() + c * kSplineBases;
      for (std::size_t p = 0; p < n; ++p) {
        const T x = uv[c * n + p];
        const auto s = spline_support(x);
        T acc = bv[c] * x;
        for (std::size_t m = 0; m < 4; ++m) acc += cf[s.first + m] * s.value[m];
        out[c * n + p] = acc;
      }
    }
  });
  const std::size_t iu = u.id(), ib = base.id(), ic = coef.id();
  return u.tape()->record(std::move(out), {u, base, coef},
                          [iu, ib, ic, d, n](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
                            const Tensor<T>& uv = t.value(iu);
                            const Tensor<T>& bv = t.value(ib);
                            const Tensor<T>& cv = t.value(ic);
                            Tensor<T> gu(uv.shape()), gb(bv.shape()), gc(cv.shape());
                            parallel_for(d, [&](std::size_t lo, std::size_t hi) {
                              for (std::size_t c = lo; c < hi; ++c) {
                                const T* cf = cv.ptr() + c * kSplineBases;
                                T* gcf = gc.ptr() + c * kSplineBases;
                                for (std::size_t p = 0; p < n; ++p) {
                                  const T x = uv[c * n + p], gv = g[c * n + p];
                                  const auto s = spline_support(x);
                                  T dx = bv[c];
                                  const bool inside = x > T(-1) && x < T(1);
                                  for (std::size_t m = 0; m < 4; ++m) {
                                    if (inside) dx += cf[s.first + m] * s.slope[m];
                                    gcf[s.first + m] += gv * s.value[m];
                                  }
                                  gu[c * n + p] = gv * dx;
                                  gb[c] += gv * x;
                                }
                              }
                            });
                            t.accumulate(iu, std::move(gu));
                            t.accumulate(ib, std::move(gb));
                            t.accumulate(ic, std::move(gc));
                          });
}

template <Real T>
void init_kan_bias(ad::ParamStore<T>& store, const std::string& prefix, std::size_t hidden, std::mt19937_64& rng) {
  init_conv(store, prefix + ".gate", hidden, hidden, 1, rng);
  std::uniform_real_distribution<double> small(-0.1, 0.1);
  for (const char* head : {"z", "r", "o"}) {
    const std::string p = prefix + "." + head;
    Tensor<T> base({hidden}), coef({hidden, kSplineBases});
    for (auto& v : base.data()) v = static_cast<T>(small(rng));
    for (auto& v : coef.data()) v = static_cast<T>(small(rng));
    store.add(p + ".base", std::move(base));
    store.add(p + ".coef", std::move(coef));
    init_conv(store, p + ".mix", hidden, hidden, 1, rng, 1.0, false);
  }
}

template <Real T>
KanBias<T> kan_bias(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix, const ad::Var<T>& h) {
  const auto u = ad::mul(ad::sigmoid(conv(tape, store, prefix + ".gate", h)), h);
  auto head = [&](const char* name) {
    const std::string p = prefix + "." + name;
    return conv(tape, store, p + ".mix",
                kan_activation(u, tape.param(store, p + ".base"), tape.param(store, p + ".coef")));
  };
  return {head("z"), head("r"), head("o")};
}

template <Real T>
void init_gru(ad::ParamStore<T>& store, const std::string& prefix, std::size_t hidden, std::size_t input,
              std::mt19937_64& rng) {
  init_conv(store, prefix + ".zr", 2 * hidden, hidden + input, 3, rng);
  init_conv(store, prefix + ".o", hidden, hidden + input, 3, rng);
}

template <Real T>
ad::Var<T> gru_step(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix, const ad::Var<T>& h,
                    const ad::Var<T>& x, const std::type_identity_t<KanBias<T>>* bias) {
  const Shape& hs = h.shape();
  if (hs.size() != 3 || x.shape().size() != 3 || x.shape()[1] != hs[1] || x.shape()[2] != hs[2]) {
    throw ShapeError("gru_step: hidden " + shape_str(hs) + " and input " + shape_str(x.shape()) + " disagree");
  }
  const std::size_t d = hs[0];
  const auto zr = conv(tape, store, prefix + ".zr", ad::concat<T>({h, x}));
  auto zp = ad::slice(zr, 0, d), rp = ad::slice(zr, d, 2 * d);
  if (bias) {
    zp = ad::add(zp, bias->z);
    rp = ad::add(rp, bias->r);
  }
  const auto z = ad::sigmoid(zp), r = ad::sigmoid(rp);
  auto op = conv(tape, store, prefix + ".o", ad::concat<T>({ad::mul(r, h), x}));
  if (bias) op = ad::add(op, bias->o);
  const auto o = ad::tanh(op);
  const auto keep = ad::add_scalar(ad::scale(z, T(-1)), T(1));
  return clamp_passthrough(ad::add(ad::mul(keep, h), ad::mul(z, o)), -1.0, 1.0);
}

template <Real T>
void init_update_operator(ad::ParamStore<T>& store, const std::string& prefix, const UpdateDims& dims,
                          std::mt19937_64& rng) {
  init_conv(store, prefix + ".corr1", dims.corr_mid, dims.corr, 1, rng);
  init_conv(store, prefix + ".corr2", dims.corr_out, dims.corr_mid, 3, rng);
  init_conv(store, prefix + ".flow1", dims.flow_mid, 2, 7, rng);
  init_conv(store, prefix + ".flow2", dims.flow_out, dims.flow_mid, 3, rng);
  init_gru(store, prefix + ".gru", dims.hidden, dims.gru_input(), rng);
  init_kan_bias(store, prefix + ".kan", dims.hidden, rng);
  init_conv(store, prefix + ".head1", dims.head_mid, dims.hidden, 3, rng);
  init_conv(store, prefix + ".head2", 2, dims.head_mid, 3, rng, 0.1);
}

template <Real T>
UpdateResult<T> update_operator(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& prefix,
                                const ad::Var<T>& hidden, const ad::Var<T>& lookup, const ad::Var<T>& flow,
                                const ad::Var<T>& context, bool use_kan) {
  auto enc = [&](const std::string& a, const std::string& b, const ad::Var<T>& in) {
    return ad::gelu(conv(tape, store, prefix + b, ad::gelu(conv(tape, store, prefix + a, in))));
  };
  const auto x = ad::concat<T>({enc(".corr1", ".corr2", lookup), enc(".flow1", ".flow2", flow), context});
  KanBias<T> bias;
  if (use_kan) bias = kan_bias(tape, store, prefix + ".kan", hidden);
  const auto h = gru_step(tape, store, prefix + ".gru", hidden, x, use_kan ? &bias : nullptr);
  const auto delta = conv(tape, store, prefix + ".head2", ad::gelu(conv(tape, store, prefix + ".head1", h)));
  return {h, delta};
}

#define LGU_INSTANTIATE_TEMPORAL(T)                                                                                 \
  template SplineSupport<T> spline_support(T);                                                                      \
  template ad::Var<T> kan_activation(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&);                      \
  template void init_kan_bias(ad::ParamStore<T>&, const std::string&, std::size_t, std::mt19937_64&);              \
  template KanBias<T> kan_bias(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&, const ad::Var<T>&);            \
  template void init_gru(ad::ParamStore<T>&, const std::string&, std::size_t, std::size_t, std::mt19937_64&);      \
  template ad::Var<T> gru_step(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&, const ad::Var<T>&,             \
                               const ad::Var<T>&, const KanBias<T>*);                                               \
  template void init_update_operator(ad::ParamStore<T>&, const std::string&, const UpdateDims&, std::mt19937_64&); \
  template UpdateResult<T> update_operator(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&, const ad::Var<T>&, \
                                           const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&, bool);

LGU_INSTANTIATE_TEMPORAL(float)
LGU_INSTANTIATE_TEMPORAL(double)

}  // namespace lgu
