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

#include "lgu/losses.hpp"

#include <cmath>

namespace lgu {

namespace {

template <Real T>
std::size_t count_valid(const Tensor<T>& gt, const Tensor<T>& valid) {
  if (gt.ndim() != 3 || gt.dim(0) != 2 || valid.shape() != Shape{gt.dim(1), gt.dim(2)}) {
    throw ShapeError("flow loss: gt " + shape_str(gt.shape()) + " and valid " + shape_str(valid.shape()) + " disagree");
  }
  std::size_t n = 0;
  for (T v : valid.data()) n += v != T(0) ? 1 : 0;
  if (n == 0) throw ContractError("flow loss: empty valid mask");
  return n;
}

}  // namespace

template <Real T>
ad::Var<T> flow_loss(const std::vector<ad::Var<T>>& flows, const Tensor<T>& gt, const Tensor<T>& valid, double gamma) {
  if (flows.empty()) throw ContractError("flow_loss: no flow estimates");
  const std::size_t nvalid = count_valid(gt, valid);
  ad::Tape<T>& tape = *flows.front().tape();
  const auto g = tape.constant(gt), m = tape.constant(valid);
  const std::size_t n = flows.size();
  ad::Var<T> total;
  for (std::size_t t = 0; t < n; ++t) {
    const double weight = std::pow(gamma, static_cast<double>(n - 1 - t)) / static_cast<double>(nvalid);
    const auto term = ad::scale(ad::sum(ad::mul_channels(ad::abs(ad::sub(flows[t], g)), m)), static_cast<T>(weight));
    total = t == 0 ? term : ad::add(total, term);
  }
  return total;
}

template <Real T>
ad::Var<T> self_supervised_loss(const ad::Var<T>& mu, const ad::Var<T>& ec, const ad::Var<T>& p) {
  const Shape& s = mu.shape();
  if (s.size() != 3 || s[0] != 2 || ec.shape() != s || p.shape() != s) {
    throw ShapeError("self_supervised_loss: need mu, ec, P of shape [2,H,W], got " + shape_str(s) + ", " +
                     shape_str(ec.shape()) + ", " + shape_str(p.shape()));
  }
  const std::size_t n = s[1] * s[2];
  const Tensor<T>& m = mu.value();
  const Tensor<T>& c = ec.value();
  const Tensor<T>& q = p.value();
  for (T v : c.data()) {
    if (!(v > 0)) throw ContractError("self_supervised_loss: covariance entries must be positive");
  }
  const double norm = 2.0 * static_cast<double>(n);
  double resid = 0, logdet = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = double(m[i]) - double(q[i]), dy = double(m[n + i]) - double(q[n + i]);
    const double det = double(c[i]) * double(c[n + i]);
    resid += (dx * dx + dy * dy) / (norm * det);
    logdet += 0.5 * std::log(det);
  }
  const std::size_t im = mu.id(), ie = ec.id(), ip = p.id();
  return mu.tape()->record(
      Tensor<T>::scalar(static_cast<T>(resid + logdet / static_cast<double>(n))), {mu, ec, p},
      [im, ie, ip, n, norm](ad::Tape<T>& t, const Tensor<T>& g, const Tensor<T>&) {
        const Tensor<T>& m = t.value(im);
        const Tensor<T>& c = t.value(ie);
        const Tensor<T>& q = t.value(ip);
        const T gs = g[0];
        Tensor<T> gm(m.shape()), gc(c.shape());
        for (std::size_t i = 0; i < n; ++i) {
          const T dx = m[i] - q[i], dy = m[n + i] - q[n + i];
          const T c0 = c[i], c1 = c[n + i], det = c0 * c1;
          const T rho = dx * dx + dy * dy;
          gm[i] = gs * T(2) * dx / (T(norm) * det);
          gm[n + i] = gs * T(2) * dy / (T(norm) * det);
          gc[i] = gs * (-rho / (T(norm) * det * c0) + T(0.5) / (T(n) * c0));
          gc[n + i] = gs * (-rho / (T(norm) * det * c1) + T(0.5) / (T(n) * c1));
        }
        t.accumulate(im, std::move(gm));
        t.accumulate(ie, std::move(gc));
        // Stop-gradient on the correspondence target.
        t.accumulate(ip, Tensor<T>(q.shape()));
      });
}

template <Real T>
ad::Var<T> total_loss(const ad::Var<T>& l_flow, const ad::Var<T>& l_self, const LossWeights& w) {
  return ad::add(ad::scale(l_flow, static_cast<T>(w.flow)), ad::scale(l_self, static_cast<T>(w.self)));
}

template <Real T>
double end_point_error(const Tensor<T>& flow, const Tensor<T>& gt, const Tensor<T>& valid) {
  const std::size_t nvalid = count_valid(gt, valid);
  require_same_shape(flow, gt, "end_point_error");
  const std::size_t n = valid.numel();
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i] == T(0)) continue;
    acc += std::hypot(double(flow[i]) - double(gt[i]), double(flow[n + i]) - double(gt[n + i]));
  }
  return acc / static_cast<double>(nvalid);
}

#define LGU_INSTANTIATE_LOSSES(T)                                                                       \
  template ad::Var<T> flow_loss(const std::vector<ad::Var<T>>&, const Tensor<T>&, const Tensor<T>&, double); \
  template ad::Var<T> self_supervised_loss(const ad::Var<T>&, const ad::Var<T>&, const ad::Var<T>&);     \
  template ad::Var<T> total_loss(const ad::Var<T>&, const ad::Var<T>&, const LossWeights&);              \
  template double end_point_error(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

LGU_INSTANTIATE_LOSSES(float)
LGU_INSTANTIATE_LOSSES(double)

}  // namespace lgu
