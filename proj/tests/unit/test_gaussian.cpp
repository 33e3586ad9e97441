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
#include <numbers>
#include <random>

#include "doctest.h"
#include "lgu/gaussian.hpp"
#include "lgu/geometry.hpp"
#include "lgu/layers.hpp"
#include "oracles.hpp"

using namespace lgu;

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

Tensor<double> shifted_grid(std::size_t h, std::size_t w, std::uint64_t seed, double spread) {
  auto c = grid_coords<double>(h, w);
  const auto noise = oracle::random_tensor({2, h, w}, seed, -spread, spread);
  for (std::size_t i = 0; i < c.numel(); ++i) c[i] += noise[i];
  return c;
}

Tensor<double> covariance(const Tensor<double>& raw) {
  ad::Tape<double> t;
  return normalize_covariance(t.constant(raw)).value();
}

}  // namespace

TEST_CASE("encode_gaussian") {
  const std::size_t c = 3, h = 4, w = 5;
  ad::ParamStore<double> ps;
  std::mt19937_64 rng(13);
  init_gaussian_encoder(ps, "g", c, rng);
  const auto fi = oracle::random_tensor({c, h, w}, 1), fj = oracle::random_tensor({c, h, w}, 2);

  SUBCASE("zero weights give zero outputs") {
    for (const auto& name : ps.names()) ps.value(name).fill(0.0);
    ad::Tape<double> t;
    const auto out = encode_gaussian(t, ps, "g", t.constant(fi), t.constant(fj));
    for (double v : out.e_r.value().data()) CHECK(v == 0.0);
    for (double v : out.raw_ec.value().data()) CHECK(v == 0.0);
  }
  SUBCASE("is a pointwise map") {
    auto a = fi, b = fj;
    for (std::size_t ch = 0; ch < c; ++ch) {
      a[ch * h * w + 7] = a[ch * h * w + 2];
      b[ch * h * w + 7] = b[ch * h * w + 2];
    }
    ad::Tape<double> t;
    const auto out = encode_gaussian(t, ps, "g", t.constant(a), t.constant(b));
    for (std::size_t d = 0; d < 2; ++d) {
      CHECK(out.e_r.value()[d * 20 + 7] == out.e_r.value()[d * 20 + 2]);
      CHECK(out.raw_ec.value()[d * 20 + 7] == out.raw_ec.value()[d * 20 + 2]);
    }
  }
  SUBCASE("matches a per-pixel dense oracle") {
    for (const auto& name : ps.names()) {
      auto& v = ps.value(name);
      v = oracle::random_tensor(v.shape(), std::hash<std::string>{}(name) % 1000 + 13);
    }
    ad::Tape<double> t;
    const auto out = encode_gaussian(t, ps, "g", t.constant(fi), t.constant(fj));
    const std::size_t n = h * w, c2 = 2 * c;
    for (std::size_t p = 0; p < n; ++p) {
      std::vector<double> in(c2), hid(c2);
      for (std::size_t k = 0; k < c; ++k) {
        in[k] = fi[k * n + p];
        in[c + k] = fj[k * n + p];
      }
      for (std::size_t o = 0; o < c2; ++o) {
        double s = ps.value("g.enc.b")[o];
        for (std::size_t k = 0; k < c2; ++k) s += ps.value("g.enc.w")[o * c2 + k] * in[k];
        hid[o] = oracle::gelu(s);
      }
      for (const char* head : {"res", "cov"}) {
        const auto& wt = ps.value(std::string("g.") + head + ".w");
        const auto& bs = ps.value(std::string("g.") + head + ".b");
        const auto& got = std::string(head) == "res" ? out.e_r.value() : out.raw_ec.value();
        for (std::size_t o = 0; o < 2; ++o) {
          double s = bs[o];
          for (std::size_t k = 0; k < c2; ++k) s += wt[o * c2 + k] * hid[k];
          CHECK(std::abs(got[o * n + p] - s) <= 1e-12);
        }
      }
    }
  }
  SUBCASE("shape mismatch") {
    ad::Tape<double> t;
    CHECK_THROWS_AS(encode_gaussian(t, ps, "g", t.constant(fi), t.constant(Tensor<double>({c, h, w + 1}))),
                    ShapeError);
  }
}

TEST_CASE("normalize_covariance") {
  SUBCASE("constant input gives exactly 2.55") {
    for (double v : {0.0, 1.0, -3.7, 1e6}) {
      const auto ec = covariance(Tensor<double>({2, 5, 6}, v));
      for (double e : ec.data()) CHECK(e == 2.55);
    }
  }
  SUBCASE("bounds hold for wild inputs") {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
      auto raw = oracle::random_tensor({2, 8, 8}, seed, -1, 1);
      const double mag = std::pow(10.0, double(seed % 12) - 3);
      for (auto& v : raw.data()) v *= mag;
      raw[0] = 1e8 * mag;
      const auto ec = covariance(raw);
      for (double e : ec.data()) {
        CHECK(e > 0.05);
        CHECK(e < 5.05);
      }
    }
  }
  SUBCASE("standardization moments on normal samples") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    Tensor<double> raw({2, 32, 32});
    for (auto& v : raw.data()) v = nd(rng);
    const auto y = norm_corr(raw);
    for (std::size_t ch = 0; ch < 2; ++ch) {
      double m = 0, v = 0;
      for (std::size_t i = 0; i < 1024; ++i) m += y[ch * 1024 + i];
      m /= 1024;
      for (std::size_t i = 0; i < 1024; ++i) v += (y[ch * 1024 + i] - m) * (y[ch * 1024 + i] - m);
      v /= 1024;
      CHECK(std::abs(m) <= 1e-6);
      CHECK(std::abs(v - 1) <= 1e-3);
    }
  }
}

TEST_CASE("density") {
  SUBCASE("peaks") {
    CHECK(std::abs(gaussian_density(0.0, 0.0, 1.0, 1.0) - 1 / kTwoPi) <= 1e-15);
    CHECK(std::abs(gaussian_density(0.0, 0.0, 0.3, 2.2) - 1 / (kTwoPi * std::sqrt(0.66))) <= 1e-15);
    const Tensor<double> mu({2, 1, 1}, {1.5, -2.0}), ec({2, 1, 1}, {1.0, 1.0});
    CHECK(density(mu, ec, mu)[0] == doctest::Approx(0.1591549).epsilon(1e-7));
    CHECK_THROWS_AS(density(mu, Tensor<double>({2, 1, 1}, {1.0, 0.0}), mu), ContractError);
  }
  SUBCASE("integrates to one") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.05, 5.05);
    for (int k = 0; k < 10; ++k) {
      const double c0 = u(rng), c1 = u(rng), mx = u(rng), my = u(rng);
      const double h = 0.05, ex = 8 * std::sqrt(c0), ey = 8 * std::sqrt(c1);
      double mass = 0;
      for (double x = mx - ex; x <= mx + ex; x += h)
        for (double y = my - ey; y <= my + ey; y += h) mass += gaussian_density(x - mx, y - my, c0, c1) * h * h;
      CHECK(std::abs(mass - 1) <= 1e-3);
    }
  }
  SUBCASE("covariance sensitivity changes sign where the squared offset equals the variance") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 4.0), off(-4.0, 4.0);
    for (int k = 0; k < 200; ++k) {
      const double c0 = u(rng), c1 = u(rng), dx = off(rng), dy = off(rng), e = 1e-6;
      const double slope = (gaussian_density(dx, dy, c0 + e, c1) - gaussian_density(dx, dy, c0 - e, c1)) / (2 * e);
      if (dx * dx < c0 * 0.99) CHECK(slope < 0);
      if (dx * dx > c0 * 1.01) CHECK(slope > 0);
    }
  }
  SUBCASE("gradients pass the oracle") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto mu = shifted_grid(4, 5, seed, 1.0), p = shifted_grid(4, 5, seed + 1, 1.0);
      const auto ec = oracle::random_tensor({2, 4, 5}, seed + 2, 0.2, 3.0);
      auto f_ec = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
        return ad::sum(density(t.constant(mu), v, t.constant(p)));
      };
      auto f_mu = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
        return ad::sum(density(v, t.constant(ec), t.constant(p)));
      };
      auto f_p = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
        return ad::sum(density(t.constant(mu), t.constant(ec), v));
      };
      CHECK(ad::fd_check<double>(f_ec, ec).max_rel_error <= 1e-5);
      CHECK(ad::fd_check<double>(f_mu, mu).max_rel_error <= 1e-5);
      CHECK(ad::fd_check<double>(f_p, p).max_rel_error <= 1e-5);
    }
  }
}

TEST_CASE("build_mask") {
  CHECK(truncation_radius(48, 64) == 7);
  CHECK(truncation_radius(8, 8) == 1);
  CHECK(truncation_radius(2, 2) == 1);
  const auto mu = grid_coords<double>(15, 15);
  const Tensor<double> ec({2, 15, 15}, 1.0);
  const auto m = build_mask(mu, ec, 7, 3.0);
  const std::size_t n = 225, centre = 7 * 15 + 7;
  double total = 0;
  for (std::size_t k = 0; k < 225; ++k) {
    CHECK(m.values[k * n + 112] >= 0);
    total += m.values[k * n + 112];
  }
  CHECK(std::abs(m.values[centre * n + 0] - 3 / kTwoPi) <= 1e-15);
  CHECK(std::abs(total - 3) <= 1e-3);

  const auto off = shifted_grid(6, 6, 4, 3.0);
  const auto ec2 = oracle::random_tensor({2, 6, 6}, 5, 0.1, 5.0);
  const auto m2 = build_mask(off, ec2, 2, 3.0);
  for (std::size_t p = 0; p < 36; ++p) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < 25; ++k)
      if (m2.values[k * 36 + p] > m2.values[best * 36 + p]) best = k;
    CHECK(best == 12);
  }
}

TEST_CASE("apply_mask") {
  const std::size_t h = 6, w = 7, n = 42;
  const auto vol = oracle::random_tensor({h, w, h, w}, 1);
  const auto mu = shifted_grid(h, w, 2, 2.5);
  const auto ec = oracle::random_tensor({2, h, w}, 3, 0.1, 5.0);
  const int r1 = 2;

  SUBCASE("zero mask leaves the volume unchanged") {
    CHECK(apply_mask(vol, build_mask(mu, ec, r1, 0.0)) == vol);
  }
  SUBCASE("window cells are scaled by 1 + m and the rest is untouched") {
    const auto m = build_mask(mu, ec, r1, 3.0);
    const auto out = apply_mask(vol, m);
    for (std::size_t p = 0; p < n; ++p) {
      const long ax = long(m.anchor[p]), ay = long(m.anchor[n + p]);
      for (long y = 0; y < long(h); ++y) {
        for (long x = 0; x < long(w); ++x) {
          const std::size_t idx = p * n + std::size_t(y) * w + std::size_t(x);
          if (std::max(std::abs(x - ax), std::abs(y - ay)) > r1) {
            CHECK(out[idx] == vol[idx]);
          } else {
            const std::size_t k = std::size_t((y - ay + r1) * (2 * r1 + 1) + (x - ax + r1));
            CHECK(out[idx] == vol[idx] * (1 + m.values[k * n + p]));
          }
        }
      }
    }
  }
  SUBCASE("masked lookups agree between paths at integer coordinates") {
    const std::size_t c = 5;
    const auto fi = oracle::random_tensor({c, h, w}, 7), fj = oracle::random_tensor({c, h, w}, 8);
    auto coords = grid_coords<double>(h, w);
    const auto jitter = oracle::random_tensor({2, h, w}, 9, -2.0, 2.0);
    for (std::size_t i = 0; i < coords.numel(); ++i) coords[i] += std::round(jitter[i]);
    const auto masked = apply_mask(build_volume(fi, fj), build_mask(mu, ec, r1, 3.0));
    const auto a = lookup_level(masked, coords, 0, 1, nullptr);
    const ContinuousMask<double> cm{&mu, &ec, r1, 3.0};
    const auto b = lookup_onthefly_level(fi, fj, coords, 0, 1, nullptr, &cm);
    CHECK(max_abs_diff(a, b) <= 1e-10);
  }
  SUBCASE("gradients pass the oracle") {
    const auto wts = oracle::random_tensor({h, w, h, w}, 11);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto mus = shifted_grid(h, w, seed + 20, 2.0);
      auto loss = [&](ad::Tape<double>& t, const ad::Var<double>& v, const ad::Var<double>& m, const ad::Var<double>& e) {
        return ad::sum(ad::mul(apply_mask(v, m, e, r1, 3.0), t.constant(wts)));
      };
      CHECK(ad::fd_check<double>([&](auto& t, const auto& v) { return loss(t, v, t.constant(mus), t.constant(ec)); }, vol)
                .max_rel_error <= 1e-5);
      CHECK(ad::fd_check<double>([&](auto& t, const auto& v) { return loss(t, t.constant(vol), v, t.constant(ec)); }, mus)
                .max_rel_error <= 1e-5);
      CHECK(ad::fd_check<double>([&](auto& t, const auto& v) { return loss(t, t.constant(vol), t.constant(mus), v); }, ec)
                .max_rel_error <= 1e-5);
      CHECK(ad::fd_check<double>(
                [&](auto& t, const auto& v) {
                  return loss(t, t.constant(vol), t.constant(mus), normalize_covariance(v));
                },
                oracle::random_tensor({2, h, w}, seed + 30))
                .max_rel_error <= 1e-5);
    }
  }
}

TEST_CASE("zero-motion fixed point") {
  SceneConfig cfg;
  cfg.height = 8;
  cfg.width = 8;
  cfg.channels = 2;
  cfg.motion_min = cfg.motion_max = 0;
  const auto scene = generate_scene<double>(cfg, 1);
  const auto grid = grid_coords<double>(8, 8);
  const auto target = reproject(grid, scene.inv_depth, scene.pose, scene.camera).coords;
  const auto m = build_mask(grid, Tensor<double>({2, 8, 8}, 1.0), 1, 3.0);
  CHECK(m.anchor == target);
}
