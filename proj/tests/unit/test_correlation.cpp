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

#include "doctest.h"
#include "lgu/correlation.hpp"
#include "lgu/geometry.hpp"
#include "lgu/ops.hpp"
#include "oracles.hpp"

using namespace lgu;

namespace {

Tensor<double> random_coords(std::size_t h, std::size_t w, std::uint64_t seed, double spread) {
  auto c = grid_coords<double>(h, w);
  const auto noise = oracle::random_tensor({2, h, w}, seed, -spread, spread);
  for (std::size_t i = 0; i < c.numel(); ++i) c[i] += noise[i];
  return c;
}

}  // namespace

TEST_CASE("build_volume on one-hot and constant features") {
  const std::size_t h = 3, w = 4, n = 12;
  Tensor<double> onehot({n, h, w});
  for (std::size_t p = 0; p < n; ++p) onehot[p * n + p] = 1.0;
  const auto vol = build_volume(onehot, onehot);
  for (std::size_t p = 0; p < n; ++p)
    for (std::size_t q = 0; q < n; ++q) CHECK(vol[p * n + q] * std::sqrt(12.0) == doctest::Approx(p == q ? 1.0 : 0.0));

  const Tensor<double> c({5, 3, 4}, 0.5);
  const auto cv = build_volume(c, c);
  for (double v : cv.data()) CHECK(v == doctest::Approx(5 * 0.25 / std::sqrt(5.0)));
  CHECK_THROWS_AS(build_volume(c, Tensor<double>({4, 3, 4})), ShapeError);
}

TEST_CASE("build_volume matches brute-force inner products and is symmetric") {
  const auto fi = oracle::random_tensor({7, 6, 6}, 5), fj = oracle::random_tensor({7, 6, 6}, 6);
  CHECK(max_abs_diff(build_volume(fi, fj), oracle::volume(fi, fj)) <= 1e-12);
  const auto a = build_volume(fi, fj), b = build_volume(fj, fi);
  for (std::size_t p = 0; p < 36; ++p)
    for (std::size_t q = 0; q < 36; ++q) CHECK(std::abs(a[p * 36 + q] - b[q * 36 + p]) <= 1e-15);
}

TEST_CASE("pooled levels equal correlation against pooled features") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto fi = oracle::random_tensor({6, 16, 16}, seed), fj = oracle::random_tensor({6, 16, 16}, seed + 50);
    const auto pyr = volume_pyramid(build_volume(fi, fj));
    for (int s = 0; s < kPyramidLevels; ++s) {
      CHECK(max_abs_diff(pyr[std::size_t(s)], build_volume(fi, avg_pool2d(fj, level_stride(s)))) <= 1e-10);
    }
  }
}

TEST_CASE("lookup_level basics") {
  SUBCASE("constant volume samples the constant inside the grid") {
    const Tensor<double> vol({4, 4, 10, 10}, 0.7);
    auto coords = random_coords(4, 4, 1, 0.4);
    for (auto& v : coords.data()) v += 3;
    const auto out = lookup_level(vol, coords, 0, 2, nullptr);
    for (double v : out.data()) CHECK(v == doctest::Approx(0.7));
  }
  SUBCASE("zero motion on the identity volume peaks at the centre tap") {
    const std::size_t h = 5, w = 6, n = 30;
    Tensor<double> onehot({n, h, w});
    for (std::size_t p = 0; p < n; ++p) onehot[p * n + p] = 1.0;
    const auto out = lookup_level(build_volume(onehot, onehot), grid_coords<double>(h, w), 0, 3, nullptr);
    const std::size_t centre = lookup_taps(3) / 2;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t t = 0; t < lookup_taps(3); ++t) {
        if (t != centre) CHECK(out[t * n + p] < out[centre * n + p]);
      }
    }
  }
  SUBCASE("random taps match the scalar bilinear oracle") {
    const std::size_t h = 6, w = 5, n = 30;
    const auto vol = oracle::random_tensor({h, w, 3, 3}, 9);
    const auto coords = random_coords(h, w, 10, 2.0);
    const auto off = oracle::random_tensor({2 * lookup_taps(1), h, w}, 11, -1.5, 1.5);
    const auto out = lookup_level(vol, coords, 1, 1, &off);
    for (std::size_t p = 0; p < n; ++p) {
      const auto plane = oracle::plane_grid(vol, p);
      for (std::size_t t = 0; t < 9; ++t) {
        const double i = double(int(t % 3) - 1), j = double(int(t / 3) - 1);
        const double x = coords[p] / 2 + i + off[2 * t * n + p];
        const double y = coords[n + p] / 2 + j + off[(2 * t + 1) * n + p];
        CHECK(std::abs(out[t * n + p] - oracle::bilinear(plane, x, y)) <= 1e-14);
      }
    }
  }
  SUBCASE("shape errors") {
    const Tensor<double> vol({4, 4, 4, 4});
    CHECK_THROWS_AS(lookup_level(vol, Tensor<double>({2, 3, 4}), 0, 1, nullptr), ShapeError);
    const Tensor<double> bad({3, 4, 4});
    CHECK_THROWS_AS(lookup_level(vol, grid_coords<double>(4, 4), 0, 1, &bad), ShapeError);
  }
}

TEST_CASE("on-the-fly lookup equals the materialized pyramid") {
  const std::size_t h = 16, w = 16;
  const int r = 3;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto fi = oracle::random_tensor({8, h, w}, seed), fj = oracle::random_tensor({8, h, w}, seed + 20);
    const auto coords = random_coords(h, w, seed + 40, 3.0);
    const auto mat = CorrPyramid<double>::materialize(fi, fj, r);
    const auto otf = CorrPyramid<double>::onthefly(fi, fj, r);
    CHECK(max_abs_diff(mat.lookup(coords), otf.lookup(coords)) <= 1e-10);
    std::vector<Tensor<double>> offs;
    for (int s = 0; s < kPyramidLevels; ++s) {
      offs.push_back(oracle::random_tensor({2 * lookup_taps(r), h, w}, seed * 10 + std::uint64_t(s), -4, 4));
    }
    CHECK(max_abs_diff(mat.lookup(coords, offs), otf.lookup(coords, offs)) <= 1e-10);
  }
}

TEST_CASE("multiply-accumulate estimates") {
  CHECK(mac_materialized(64, 64, 128) == doctest::Approx(2.147e9).epsilon(1e-3));
  CHECK(mac_onthefly(64, 64, 128, 3) == doctest::Approx(2.569e7).epsilon(1e-3));
}

TEST_CASE("differentiable correlation ops pass the finite-difference oracle") {
  const std::size_t h = 8, w = 8;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    const auto fi = oracle::random_tensor({3, h, w}, seed), fj = oracle::random_tensor({3, h, w}, seed + 100);
    const auto coords = random_coords(h, w, seed + 200, 2.0);
    const auto off = oracle::random_tensor({2 * lookup_taps(1), h, w}, seed + 300, -2, 2);
    const auto wts = oracle::random_tensor({lookup_taps(1), h, w}, seed + 400);
    const int s = static_cast<int>(seed % 2);
    auto weighted = [&](ad::Tape<double>& t, const ad::Var<double>& v) { return ad::sum(ad::mul(v, t.constant(wts))); };

    auto via_volume_fj = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
      auto vol = build_volume(t.constant(fi), v);
      auto o = t.constant(off);
      return weighted(t, lookup_level(ad::avg_pool2d(vol, level_stride(s)), t.constant(coords), s, 1, &o));
    };
    auto via_volume_fi = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
      auto vol = build_volume(v, t.constant(fj));
      return weighted(t, lookup_level(vol, t.constant(coords), 0, 1, nullptr));
    };
    auto via_coords = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
      auto vol = t.constant(build_volume(fi, fj));
      auto o = t.constant(off);
      return weighted(t, lookup_level(vol, v, 0, 1, &o));
    };
    auto via_offsets = [&](ad::Tape<double>& t, const ad::Var<double>& v) {
      auto vol = t.constant(avg_pool2d(build_volume(fi, fj), 2));
      return weighted(t, lookup_level(vol, t.constant(coords), 1, 1, &v));
    };
    CHECK(ad::fd_check<double>(via_volume_fj, fj).max_rel_error <= 1e-5);
    CHECK(ad::fd_check<double>(via_volume_fi, fi).max_rel_error <= 1e-5);
    CHECK(ad::fd_check<double>(via_coords, coords).max_rel_error <= 1e-5);
    CHECK(ad::fd_check<double>(via_offsets, off).max_rel_error <= 1e-5);

    const auto mu = random_coords(h, w, seed + 500, 1.0);
    const auto ec = oracle::random_tensor({2, h, w}, seed + 600, 0.5, 3.0);
    auto otf = [&](ad::Tape<double>& t, const ad::Var<double>* vfi, const ad::Var<double>* vfj,
                   const ad::Var<double>* vc, const ad::Var<double>* vo, const ad::Var<double>* vmu,
                   const ad::Var<double>* vec) {
      auto a = vfi ? *vfi : t.constant(fi);
      auto b = vfj ? *vfj : ad::avg_pool2d(t.constant(fj), level_stride(s));
      auto c = vc ? *vc : t.constant(coords);
      auto o = vo ? *vo : t.constant(off);
      auto m = vmu ? *vmu : t.constant(mu);
      auto e = vec ? *vec : t.constant(ec);
      return weighted(t, lookup_onthefly_level(a, b, c, s, 1, &o, &m, &e, 2, 3.0));
    };
    CHECK(ad::fd_check<double>([&](auto& t, const auto& v) { return otf(t, &v, nullptr, nullptr, nullptr, nullptr, nullptr); }, fi)
              .max_rel_error <= 1e-5);
    CHECK(ad::fd_check<double>(
              [&](auto& t, const auto& v) {
                auto b = ad::avg_pool2d(v, level_stride(s));
                return otf(t, nullptr, &b, nullptr, nullptr, nullptr, nullptr);
              },
              fj)
              .max_rel_error <= 1e-5);
    CHECK(ad::fd_check<double>([&](auto& t, const auto& v) { return otf(t, nullptr, nullptr, &v, nullptr, nullptr, nullptr); }, coords)
              .max_rel_error <= 1e-5);
    CHECK(ad::fd_check<double>([&](auto& t, const auto& v) { return otf(t, nullptr, nullptr, nullptr, &v, nullptr, nullptr); }, off)
              .max_rel_error <= 1e-5);
    CHECK(ad::fd_check<double>([&](auto& t, const auto& v) { return otf(t, nullptr, nullptr, nullptr, nullptr, &v, nullptr); }, mu)
              .max_rel_error <= 1e-5);
    CHECK(ad::fd_check<double>([&](auto& t, const auto& v) { return otf(t, nullptr, nullptr, nullptr, nullptr, nullptr, &v); }, ec)
              .max_rel_error <= 1e-5);
  }
}

TEST_CASE("both paths give the same feature gradients") {
  const std::size_t h = 8, w = 8;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto fi = oracle::random_tensor({4, h, w}, seed), fj = oracle::random_tensor({4, h, w}, seed + 9);
    const auto coords = random_coords(h, w, seed + 3, 2.0);
    const auto off = oracle::random_tensor({2 * lookup_taps(2), h, w}, seed + 4, -2, 2);
    const auto wts = oracle::random_tensor({lookup_taps(2), h, w}, seed + 5);
    for (int s = 0; s < kPyramidLevels; ++s) {
      ad::Tape<double> ta, tb;
      auto ja = ta.input(fj), jb = tb.input(fj);
      auto oa = ta.constant(off), ob = tb.constant(off);
      auto la = lookup_level(ad::avg_pool2d(build_volume(ta.constant(fi), ja), level_stride(s)), ta.constant(coords),
                             s, 2, &oa);
      auto lb = lookup_onthefly_level(tb.constant(fi), ad::avg_pool2d(jb, level_stride(s)), tb.constant(coords), s, 2,
                                      &ob);
      CHECK(max_abs_diff(la.value(), lb.value()) <= 1e-10);
      ta.backward(ad::sum(ad::mul(la, ta.constant(wts))));
      tb.backward(ad::sum(ad::mul(lb, tb.constant(wts))));
      CHECK(max_abs_diff(*ta.grad_of(ja), *tb.grad_of(jb)) <= 1e-8);
    }
  }
}
