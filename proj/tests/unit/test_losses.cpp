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

#include <cmath>
#include <vector>

#include "doctest.h"
#include "lgu/losses.hpp"
#include "oracles.hpp"

using namespace lgu;

namespace {

Tensor<double> ones_mask(std::size_t h, std::size_t w) {
  Tensor<double> m({h, w});
  m.fill(1.0);
  return m;
}

double self_loss_value(const Tensor<double>& mu, const Tensor<double>& ec, const Tensor<double>& p) {
  ad::Tape<double> t;
  return self_supervised_loss(t.constant(mu), t.constant(ec), t.constant(p)).value().item();
}

}  // namespace

TEST_CASE("flow_loss") {
  const std::size_t h = 4, w = 5, n = h * w;
  const auto gt = oracle::random_tensor({2, h, w}, 3, -4, 4);

  SUBCASE("zero at ground truth") {
    ad::Tape<double> t;
    std::vector<ad::Var<double>> flows(8, t.constant(gt));
    CHECK(flow_loss(flows, gt, ones_mask(h, w)).value().item() == 0.0);
  }
  SUBCASE("unit error at one iteration weighs gamma^(N-t)") {
    for (int k = 0; k < 8; ++k) {
      ad::Tape<double> t;
      std::vector<ad::Var<double>> flows(8, t.constant(gt));
      auto off = gt;
      for (std::size_t i = 0; i < n; ++i) off[i] += 1.0;
      flows[static_cast<std::size_t>(k)] = t.constant(off);
      CHECK(flow_loss(flows, gt, ones_mask(h, w)).value().item() == doctest::Approx(std::pow(0.9, 7 - k)).epsilon(1e-14));
    }
  }
  SUBCASE("random estimates match a scalar loop") {
    const auto valid_raw = oracle::random_tensor({h, w}, 41);
    Tensor<double> valid({h, w});
    for (std::size_t i = 0; i < n; ++i) valid[i] = valid_raw[i] > -0.3 ? 1.0 : 0.0;
    ad::Tape<double> t;
    std::vector<ad::Var<double>> flows;
    std::vector<Tensor<double>> raw;
    for (int k = 0; k < 8; ++k) {
      raw.push_back(oracle::random_tensor({2, h, w}, 41 + static_cast<std::uint64_t>(k), -5, 5));
      flows.push_back(t.constant(raw.back()));
    }
    double expect = 0;
    double count = 0;
    for (std::size_t i = 0; i < n; ++i) count += valid[i];
    for (int k = 0; k < 8; ++k) {
      double s = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (valid[i] == 0) continue;
        s += std::fabs(raw[k][i] - gt[i]) + std::fabs(raw[k][n + i] - gt[n + i]);
      }
      expect += std::pow(0.9, 7 - k) * s / count;
    }
    const double got = flow_loss(flows, gt, valid).value().item();
    CHECK(got == doctest::Approx(expect).epsilon(1e-13));
    CHECK(got >= 0.0);
  }
  SUBCASE("finite-difference gradient") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto x = oracle::random_tensor({2, h, w}, 100 + seed, -3, 3);
      const ad::ScalarFn<double> f = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
        return flow_loss<double>({v, ad::scale(v, 0.5)}, gt, ones_mask(h, w));
      };
      CHECK(ad::fd_check<double>(f, x).max_rel_error <= 1e-5);
    }
  }
  SUBCASE("contract errors") {
    ad::Tape<double> t;
    std::vector<ad::Var<double>> flows(2, t.constant(gt));
    CHECK_THROWS_AS(flow_loss(flows, gt, Tensor<double>({h, w})), ContractError);
    CHECK_THROWS_AS(flow_loss<double>({}, gt, ones_mask(h, w)), ContractError);
    CHECK_THROWS_AS(flow_loss(flows, gt, ones_mask(w, h)), ShapeError);
  }
}

TEST_CASE("self_supervised_loss") {
  const std::size_t h = 3, w = 4, n = h * w;

  SUBCASE("zero at alignment with unit covariance") {
    const auto p = oracle::random_tensor({2, h, w}, 5, 0, 10);
    Tensor<double> ec({2, h, w});
    ec.fill(1.0);
    CHECK(self_loss_value(p, ec, p) == 0.0);
  }
  SUBCASE("matches a scalar loop") {
    const auto mu = oracle::random_tensor({2, h, w}, 6, 0, 10);
    const auto p = oracle::random_tensor({2, h, w}, 7, 0, 10);
    const auto ec = oracle::random_tensor({2, h, w}, 8, 0.1, 5);
    double resid = 0, logdet = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double det = ec[i] * ec[n + i];
      const double r2 = std::pow(mu[i] - p[i], 2) + std::pow(mu[n + i] - p[n + i], 2);
      resid += r2 / (static_cast<double>(n) * 2 * det);
      logdet += 0.5 * std::log(det);
    }
    CHECK(self_loss_value(mu, ec, p) == doctest::Approx(resid + logdet / n).epsilon(1e-13));
  }
  SUBCASE("target gradient is exactly zero") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      ad::Tape<double> t;
      const auto mu = t.input(oracle::random_tensor({2, h, w}, seed, 0, 10));
      const auto ec = t.input(oracle::random_tensor({2, h, w}, seed + 50, 0.1, 5));
      const auto p = t.input(oracle::random_tensor({2, h, w}, seed + 90, 0, 10));
      t.backward(self_supervised_loss(mu, ec, p));
      REQUIRE(t.grad_of(p) != nullptr);
      for (double g : t.grad_of(p)->data()) CHECK(g == 0.0);
    }
  }
  SUBCASE("finite-difference gradients in mu and ec") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto mu = oracle::random_tensor({2, h, w}, seed, 0, 10);
      const auto ec = oracle::random_tensor({2, h, w}, seed + 50, 0.1, 5);
      const auto p = oracle::random_tensor({2, h, w}, seed + 90, 0, 10);
      const ad::ScalarFn<double> via_mu = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
        return self_supervised_loss(v, t.constant(ec), t.constant(p));
      };
      const ad::ScalarFn<double> via_ec = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
        return self_supervised_loss(t.constant(mu), v, t.constant(p));
      };
      CHECK(ad::fd_check<double>(via_mu, mu).max_rel_error <= 1e-5);
      CHECK(ad::fd_check<double>(via_ec, ec).max_rel_error <= 1e-5);
    }
  }
  SUBCASE("mu-gradient vanishes only at alignment") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto p = oracle::random_tensor({2, h, w}, seed, 0, 10);
      const auto ec = oracle::random_tensor({2, h, w}, seed + 20, 0.1, 5);
      auto grad_at = [&](const Tensor<double>& m) {
        ad::Tape<double> t;
        const auto v = t.input(m);
        t.backward(self_supervised_loss(v, t.constant(ec), t.constant(p)));
        return *t.grad_of(v);
      };
      const auto g0 = grad_at(p);
      for (double g : g0.data()) CHECK(g == 0.0);
      auto off = p;
      const std::size_t k = seed % (2 * n);
      off[k] += 1e-3;
      const auto g = grad_at(off);
      for (std::size_t i = 0; i < 2 * n; ++i) {
        if (i == k) {
          CHECK(g[i] > 0.0);
        } else {
          CHECK(g[i] == 0.0);
        }
      }
    }
  }
  SUBCASE("optimal determinant matches a golden-section search") {
    // With the log-det averaged over pixels, d/d(det) of one pixel's terms vanishes at det = rho^2.
    const auto p = oracle::random_tensor({2, h, w}, 31, 0, 10);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto mu = p;
      const auto shift = oracle::random_tensor({2}, seed, 0.3, 1.5);
      const std::size_t px = seed % n;
      mu[px] += shift[0];
      mu[n + px] += shift[1];
      const double rho2 = shift[0] * shift[0] + shift[1] * shift[1];
      const auto objective = [&](double det) {
        Tensor<double> ec({2, h, w});
        ec.fill(1.0);
        ec[px] = std::sqrt(det);
        ec[n + px] = std::sqrt(det);
        return self_loss_value(mu, ec, p);
      };
      CHECK(oracle::golden_min(objective, 1e-3, 20.0) == doctest::Approx(rho2).epsilon(1e-6));
    }
  }
  SUBCASE("shape errors") {
    ad::Tape<double> t;
    const auto a = t.constant(Tensor<double>({2, h, w}));
    const auto b = t.constant(Tensor<double>({2, w, h}));
    CHECK_THROWS_AS(self_supervised_loss(a, b, a), ShapeError);
  }
}

TEST_CASE("total_loss") {
  ad::Tape<double> t;
  const auto one = t.constant(Tensor<double>::scalar(1.0));
  CHECK(total_loss(one, one).value().item() == doctest::Approx(0.13).epsilon(1e-15));
  const auto zero = t.constant(Tensor<double>::scalar(0.0));
  CHECK(total_loss(zero, zero).value().item() == 0.0);
  const auto r = oracle::random_tensor({2}, 9, -10, 10);
  const LossWeights lw{0.3, 0.7, 0.9};
  CHECK(total_loss(t.constant(Tensor<double>::scalar(r[0])), t.constant(Tensor<double>::scalar(r[1])), lw)
            .value()
            .item() == doctest::Approx(0.3 * r[0] + 0.7 * r[1]).epsilon(1e-15));
}

TEST_CASE("end_point_error") {
  const std::size_t h = 3, w = 3, n = h * w;
  const auto gt = oracle::random_tensor({2, h, w}, 1);
  auto est = gt;
  for (std::size_t i = 0; i < n; ++i) {
    est[i] += 3.0;
    est[n + i] += 4.0;
  }
  CHECK(end_point_error(est, gt, ones_mask(h, w)) == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(end_point_error(gt, gt, ones_mask(h, w)) == 0.0);
}
