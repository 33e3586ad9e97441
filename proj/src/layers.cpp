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

#include "lgu/layers.hpp"

#include "array_eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lgu {

template <Real T>
void init_conv(ad::ParamStore<T>& store, const std::string& name, std::size_t cout, std::size_t cin, std::size_t k,
               std::mt19937_64& rng, double gain, bool bias) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(cin * k * k));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor<T> w({cout, cin, k, k});
  for (auto& v : w.data()) v = static_cast<T>(u(rng));
  store.add(name + ".w", std::move(w));
  if (bias) store.add(name + ".b", Tensor<T>({cout}));
}

template <Real T>
ad::Var<T> conv(ad::Tape<T>& tape, ad::ParamStore<T>& store, const std::string& name, const ad::Var<T>& x) {
  auto w = tape.param(store, name + ".w");
  if (store.contains(name + ".b")) {
    auto b = tape.param(store, name + ".b");
    return ad::conv2d(x, w, &b);
  }
  return ad::conv2d(x, w, static_cast<const ad::Var<T>*>(nullptr));
}

namespace {

struct ChannelStats {
  double mean;
  double inv_std;
};

template <Real T>
ChannelStats channel_stats(const T* x, std::size_t n, double eps) {
  const double x0 = x[0];
  double dev = 0;
  for (std::size_t i = 0; i < n; ++i) dev += static_cast<double>(x[i]) - x0;
  const double mean = x0 + dev / static_cast<double>(n);
  double var = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(x[i]) - mean;
    var += d * d;
  }
  var /= static_cast<double>(n);
  return {mean, 1.0 / std::sqrt(var + eps)};
}

void check_chw(const Shape& s, const char* op) {
  if (s.size() != 3) throw ShapeError(std::string(op) + ": need [C,H,W], got " + shape_str(s));
}

}  // namespace

template <Real T>
Tensor<T> norm_corr(const Tensor<T>& x, double eps) {
  check_chw(x.shape(), "norm_corr");
  const std::size_t c = x.dim(0), n = x.dim(1) * x.dim(2);
  Tensor<T> y(x.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* src = x.ptr() + ch * n;
    const ChannelStats st = channel_stats(src, n, eps);
    for (std::size_t i = 0; i < n; ++i) y[ch * n + i] = static_cast<T>((static_cast<double>(src[i]) - st.mean) * st.inv_std);
  }
  return y;
}

template <Real T>
ad::Var<T> norm_corr(const ad::Var<T>& x, double eps) {
  Tensor<T> y = norm_corr(x.value(), eps);
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix, eps](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>& out) {
    const Tensor<T>& xv = t.value(ix);
    const std::size_t c = xv.dim(0), n = xv.dim(1) * xv.dim(2);
    Tensor<T> gx(xv.shape());
    for (std::size_t ch = 0; ch < c; ++ch) {
      const ChannelStats st = channel_stats(xv.ptr() + ch * n, n, eps);
      double mg = 0, mgy = 0;
      for (std::size_t i = 0; i < n; ++i) {
        mg += g[ch * n + i];
        mgy += static_cast<double>(g[ch * n + i]) * out[ch * n + i];
      }
      mg /= static_cast<double>(n);
      mgy /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        gx[ch * n + i] = static_cast<T>(st.inv_std * (g[ch * n + i] - mg - out[ch * n + i] * mgy));
      }
    }
    t.accumulate(ix, std::move(gx));
  });
}

namespace {

template <Real T>
T sigmoid_scalar(T x) {
  return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace

template <Real T>
ad::Var<T> bounded_sigmoid(const ad::Var<T>& x, double lo, double hi) {
  const T tlo = std::nextafter(static_cast<T>(lo), std::numeric_limits<T>::infinity());
  const T thi = std::nextafter(static_cast<T>(hi), -std::numeric_limits<T>::infinity());
  const T span = static_cast<T>(hi - lo), base = static_cast<T>(lo);
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.numel(); ++i) y[i] = std::clamp(base + span * sigmoid_scalar(xv[i]), tlo, thi);
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix, span](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const Tensor<T>& xin = t.value(ix);
    Tensor<T> gx(xin.shape());
    for (std::size_t i = 0; i < xin.numel(); ++i) {
      const T s = sigmoid_scalar(xin[i]);
      gx[i] = g[i] * span * s * (T(1) - s);
    }
    t.accumulate(ix, std::move(gx));
  });
}

template <Real T>
ad::Var<T> bounded_tanh(const ad::Var<T>& x, double bound) {
  const T b = static_cast<T>(bound);
  const T top = std::nextafter(b, T(0));
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  using detail::CArrayMap;
  detail::chunked<T>(y.ptr(), y.numel(), [b, top](const CArrayMap<T>& v) { return (b * v.tanh()).max(-top).min(top); },
                     xv.ptr());
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(y), {x}, [ix, b](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
    const Tensor<T>& xin = t.value(ix);
    Tensor<T> gx(xin.shape());
    using detail::CArrayMap;
    detail::chunked<T>(
        gx.ptr(), gx.numel(),
        [b](const CArrayMap<T>& gv, const CArrayMap<T>& v) { return gv * b * (T(1) - v.tanh().square()); }, g.ptr(),
        xin.ptr());
    t.accumulate(ix, std::move(gx));
  });
}

template <Real T>
ad::Var<T> clamp_passthrough(const ad::Var<T>& x, double lo, double hi) {
  Tensor<T> y = x.value();
  for (auto& v : y.data()) v = std::clamp(v, static_cast<T>(lo), static_cast<T>(hi));
  const std::size_t ix = x.id();
  return x.tape()->record(std::move(y), {x},
                          [ix](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) { t.accumulate(ix, g); });
}

#define LGU_INSTANTIATE_LAYERS(T)                                                                                 \
  template void init_conv(ad::ParamStore<T>&, const std::string&, std::size_t, std::size_t, std::size_t,         \
                          std::mt19937_64&, double, bool);                                                       \
  template ad::Var<T> conv(ad::Tape<T>&, ad::ParamStore<T>&, const std::string&, const ad::Var<T>&);             \
  template Tensor<T> norm_corr(const Tensor<T>&, double);                                                        \
  template ad::Var<T> norm_corr(const ad::Var<T>&, double);                                                      \
  template ad::Var<T> bounded_sigmoid(const ad::Var<T>&, double, double);                                        \
  template ad::Var<T> bounded_tanh(const ad::Var<T>&, double);                                                   \
  template ad::Var<T> clamp_passthrough(const ad::Var<T>&, double, double);

LGU_INSTANTIATE_LAYERS(float)
LGU_INSTANTIATE_LAYERS(double)

}  // namespace lgu
