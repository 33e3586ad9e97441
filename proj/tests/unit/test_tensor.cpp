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

#include <filesystem>
#include <random>

#include "doctest.h"
#include "lgu/ops.hpp"
#include "lgu/serialize.hpp"
#include "oracles.hpp"

using namespace lgu;

namespace {
std::vector<Point2<double>> pts(std::initializer_list<std::pair<double, double>> xy) {
  std::vector<Point2<double>> out;
  for (auto [x, y] : xy) out.push_back({x, y});
  return out;
}
}  // namespace

TEST_CASE("bilinear_sample on constant and ramp fields") {
  Tensor<double> ones({2, 2}, 1.0);
  auto c = pts({{0.5, 0.5}});
  CHECK(bilinear_sample<double>(ones, c)[0] == doctest::Approx(1.0));

  Tensor<double> ramp({2, 2}, {0, 1, 0, 1});
  auto c2 = pts({{0.5, 0.0}});
  CHECK(bilinear_sample<double>(ramp, c2)[0] == doctest::Approx(0.5));
}

TEST_CASE("bilinear_sample matches the scalar four-tap oracle") {
  const auto src = oracle::random_tensor({4, 4}, 7);
  auto c = pts({{1.25, 2.75}, {-0.5, 0.3}, {3.4, 3.9}, {2.0, 1.0}});
  const auto out = bilinear_sample<double>(src, c);
  const auto grid = oracle::to_grid(src);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(out[i] == doctest::Approx(oracle::bilinear(grid, c[i].x, c[i].y)).epsilon(1e-14));
}

TEST_CASE("bilinear_sample is exact at integer coordinates and zero far outside") {
  const auto src = oracle::random_tensor({5, 6}, 1);
  for (std::size_t y = 0; y < 5; ++y) {
    for (std::size_t x = 0; x < 6; ++x) {
      auto c = pts({{double(x), double(y)}});
      CHECK(bilinear_sample<double>(src, c)[0] == src.at(y, x));
    }
  }
  auto far = pts({{-3.0, 1.0}, {10.0, 2.5}, {2.0, 7.2}});
  const auto out = bilinear_sample<double>(src, far);
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("bilinear_sample is linear in the source") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 6.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto a = oracle::random_tensor({6, 7}, 100 + trial);
    const auto b = oracle::random_tensor({6, 7}, 200 + trial);
    const double alpha = u(rng), beta = u(rng);
    Tensor<double> mix(a.shape());
    for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = alpha * a[i] + beta * b[i];
    std::vector<Point2<double>> c;
    for (int k = 0; k < 20; ++k) c.push_back({u(rng), u(rng)});
    const auto sm = bilinear_sample<double>(mix, c), sa = bilinear_sample<double>(a, c), sb = bilinear_sample<double>(b, c);
    for (std::size_t k = 0; k < c.size(); ++k) {
      const double expect = alpha * sa[k] + beta * sb[k];
      CHECK(std::abs(sm[k] - expect) <= 1e-12 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST_CASE("bilinear_sample rejects non-2D sources") {
  Tensor<double> t({2, 2, 2});
  auto c = pts({{0.0, 0.0}});
  CHECK_THROWS_AS(bilinear_sample<double>(t, c), ShapeError);
}

TEST_CASE("bilinear_sample_backward matches finite differences in coordinates") {
  const auto src = oracle::random_tensor({5, 5}, 3);
  auto c = pts({{1.3, 2.6}, {0.2, 3.7}});
  Tensor<double> go({2}, 1.0);
  std::vector<Point2<double>> gc;
  Tensor<double> gs;
  bilinear_sample_backward<double>(src, c, go, &gs, &gc);
  const auto grid = oracle::to_grid(src);
  const double h = 1e-6;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double dx = (oracle::bilinear(grid, c[i].x + h, c[i].y) - oracle::bilinear(grid, c[i].x - h, c[i].y)) / (2 * h);
    const double dy = (oracle::bilinear(grid, c[i].x, c[i].y + h) - oracle::bilinear(grid, c[i].x, c[i].y - h)) / (2 * h);
    CHECK(gc[i].x == doctest::Approx(dx).epsilon(1e-7));
    CHECK(gc[i].y == doctest::Approx(dy).epsilon(1e-7));
  }
  double total = 0;
  for (double v : gs.data()) total += v;
  CHECK(total == doctest::Approx(2.0));
}

TEST_CASE("avg_pool2d") {
  const auto src = oracle::random_tensor({3, 8, 8}, 4);
  CHECK(avg_pool2d(src, 1) == src);

  Tensor<double> small({2, 2}, {1, 3, 5, 7});
  const auto p = avg_pool2d(small, 2);
  CHECK(p.shape() == Shape{1, 1});
  CHECK(p[0] == 4.0);

  Tensor<double> ramp({8, 8});
  for (std::size_t i = 0; i < 64; ++i) ramp[i] = static_cast<double>(i);
  const auto got = avg_pool2d(ramp, 4);
  const auto want = oracle::avg_pool(ramp, 4);
  CHECK(got.shape() == Shape{2, 2});
  for (std::size_t i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(want[i]));

  CHECK_THROWS_AS(avg_pool2d(oracle::random_tensor({6, 6}, 1), 4), ShapeError);
  CHECK_THROWS_AS(avg_pool2d(oracle::random_tensor({6, 6}, 1), 3), ShapeError);
}

TEST_CASE("avg_pool2d commutes with per-cell linear maps") {
  const auto a = oracle::random_tensor({2, 8, 8}, 21);
  const auto b = oracle::random_tensor({2, 8, 8}, 22);
  Tensor<double> mix(a.shape());
  for (std::size_t i = 0; i < mix.numel(); ++i) mix[i] = 3.0 * a[i] - 0.5 * b[i];
  for (int k : {2, 4, 8}) {
    const auto pm = avg_pool2d(mix, k), pa = avg_pool2d(a, k), pb = avg_pool2d(b, k);
    for (std::size_t i = 0; i < pm.numel(); ++i) CHECK(pm[i] == doctest::Approx(3.0 * pa[i] - 0.5 * pb[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d") {
  const auto src = oracle::random_tensor({2, 5, 5}, 12);
  SUBCASE("identity kernel") {
    Tensor<double> k({2, 2, 3, 3});
    k[((0 * 2 + 0) * 3 + 1) * 3 + 1] = 1;
    k[((1 * 2 + 1) * 3 + 1) * 3 + 1] = 1;
    CHECK(conv2d<double>(src, k, nullptr) == src);
  }
  SUBCASE("all-ones kernel on a constant interior") {
    Tensor<double> cst({1, 5, 5}, 2.5);
    Tensor<double> k({1, 1, 3, 3}, 1.0);
    const auto out = conv2d<double>(cst, k, nullptr);
    for (std::size_t y = 1; y < 4; ++y)
      for (std::size_t x = 1; x < 4; ++x) CHECK(out.at(0, y, x) == doctest::Approx(22.5));
  }
  SUBCASE("random kernel matches the naive loop") {
    const auto k = oracle::random_tensor({3, 2, 3, 3}, 11);
    const auto b = oracle::random_tensor({3}, 13);
    const auto got = conv2d<double>(src, k, &b);
    const auto want = oracle::conv2d(src, k, &b);
    CHECK(max_abs_diff(got, want) < 1e-13);
    const auto k7 = oracle::random_tensor({2, 2, 7, 7}, 14);
    CHECK(max_abs_diff(conv2d<double>(src, k7, nullptr), oracle::conv2d(src, k7, nullptr)) < 1e-13);
  }
  SUBCASE("channel mismatch") {
    const auto k = oracle::random_tensor({3, 4, 3, 3}, 11);
    CHECK_THROWS_AS(conv2d<double>(src, k, nullptr), ShapeError);
  }
}

TEST_CASE("conv2d_backward matches finite differences") {
  const auto src = oracle::random_tensor({2, 4, 5}, 31);
  const auto k = oracle::random_tensor({3, 2, 3, 3}, 32);
  const auto wsum = oracle::random_tensor({3, 4, 5}, 33);
  auto loss = [&](const Tensor<double>& s, const Tensor<double>& kk) {
    const auto o = oracle::conv2d(s, kk, nullptr);
    double acc = 0;
    for (std::size_t i = 0; i < o.numel(); ++i) acc += o[i] * wsum[i];
    return acc;
  };
  const auto g = conv2d_backward<double>(src, k, wsum, true);
  const double h = 1e-6;
  for (std::size_t i = 0; i < src.numel(); i += 3) {
    auto p = src, m = src;
    p[i] += h;
    m[i] -= h;
    CHECK(g.src[i] == doctest::Approx((loss(p, k) - loss(m, k)) / (2 * h)).epsilon(1e-7));
  }
  for (std::size_t i = 0; i < k.numel(); i += 5) {
    auto p = k, m = k;
    p[i] += h;
    m[i] -= h;
    CHECK(g.kernel[i] == doctest::Approx((loss(src, p) - loss(src, m)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("fully_connected is a per-row affine map") {
  const auto x = oracle::random_tensor({4, 3}, 1);
  const auto w = oracle::random_tensor({2, 3}, 2);
  const auto b = oracle::random_tensor({2}, 3);
  const auto y = fully_connected<double>(x, w, &b);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t o = 0; o < 2; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < 3; ++i) acc += w.at(o, i) * x.at(n, i);
      CHECK(y.at(n, o) == doctest::Approx(acc));
    }
  CHECK_THROWS_AS(fully_connected<double>(x, oracle::random_tensor({2, 4}, 1), nullptr), ShapeError);
}

TEST_CASE("upsample2x reproduces constants and its adjoint is consistent") {
  Tensor<double> c({1, 3, 4}, 1.75);
  const auto uc = upsample2x(c);
  for (double v : uc.data()) CHECK(v == doctest::Approx(1.75));
  const auto x = oracle::random_tensor({2, 3, 4}, 8);
  const auto g = oracle::random_tensor({2, 6, 8}, 9);
  const auto y = upsample2x(x);
  const auto gx = upsample2x_backward(g, x.shape());
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.numel(); ++i) lhs += y[i] * g[i];
  for (std::size_t i = 0; i < x.numel(); ++i) rhs += x[i] * gx[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("non-finite values are surfaced") {
  Tensor<double> k({1, 1, 1, 1}, std::numeric_limits<double>::infinity());
  Tensor<double> src({1, 2, 2}, 1.0);
  CHECK_THROWS_AS(conv2d<double>(src, k, nullptr), NumericError);
}

TEST_CASE("tensor serialization") {
  const auto dir = std::filesystem::temp_directory_path() / "lgu_test_tensor";
  std::filesystem::create_directories(dir);

  SUBCASE("round trip is bit exact for both dtypes and scalars") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1e3);
    for (int trial = 0; trial < 8; ++trial) {
      Shape s;
      const std::size_t nd = rng() % 4;
      for (std::size_t d = 0; d < nd; ++d) s.push_back(1 + rng() % 5);
      Tensor<double> t64(s);
      for (auto& v : t64.data()) v = n(rng);
      const Tensor<float> t32 = t64.cast<float>();
      save_tensor(t64, dir / "a.lgut");
      save_tensor(t32, dir / "b.lgut");
      CHECK(load_tensor_as<double>(dir / "a.lgut") == t64);
      CHECK(load_tensor_as<float>(dir / "b.lgut") == t32);
      const auto bytes = encode_tensor(t64);
      CHECK(encode_tensor(std::get<Tensor<double>>(decode_tensor(bytes))) == bytes);
    }
    const auto s = Tensor<double>::scalar(-0.0);
    save_tensor(s, dir / "s.lgut");
    const auto back = load_tensor_as<double>(dir / "s.lgut");
    CHECK(back.ndim() == 0);
    CHECK(std::signbit(back[0]));
  }

  SUBCASE("header layout") {
    Tensor<float> t({2}, {1.0f, -2.0f});
    const auto b = encode_tensor(t);
    REQUIRE(b.size() == 4 + 3 + 8 + 8);
    CHECK(b[0] == 'L');
    CHECK(b[3] == 'T');
    CHECK(b[4] == 1);
    CHECK(b[5] == 0);
    CHECK(b[6] == 1);
    CHECK(b[7] == 2);
    // 1.0f = 0x3f800000, stored little-endian
    CHECK(b[15] == 0x00);
    CHECK(b[16] == 0x00);
    CHECK(b[17] == 0x80);
    CHECK(b[18] == 0x3f);
  }

  SUBCASE("format errors carry an offset") {
    auto b = encode_tensor(Tensor<double>({3}, {1, 2, 3}));
    auto bad = b;
    bad[1] = 'X';
    try {
      decode_tensor(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 1);
    }
    bad = b;
    bad[5] = 7;
    CHECK_THROWS_AS(decode_tensor(bad), FormatError);
    bad = b;
    bad.resize(b.size() - 3);
    try {
      decode_tensor(bad);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
  }
  std::filesystem::remove_all(dir);
}
