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

#include "doctest.h"
#include "lgu/autodiff.hpp"
#include "oracles.hpp"

using namespace lgu;
using namespace lgu::ad;

TEST_CASE("backward of simple reductions") {
  ParamStore<double> ps;
  ps.add("p", Tensor<double>({3}, {1, 2, 3}));
  SUBCASE("sum") {
    Tape<double> t;
    t.backward(sum(t.param(ps, "p")));
    for (double g : ps.grad("p").data()) CHECK(g == 1.0);
  }
  SUBCASE("sum of squares") {
    Tape<double> t;
    auto p = t.param(ps, "p");
    t.backward(sum(mul(p, p)));
    CHECK(ps.grad("p") == Tensor<double>({3}, {2, 4, 6}));
  }
}

TEST_CASE("backward contracts") {
  ParamStore<double> ps;
  ps.add("used", Tensor<double>({2}, 1.0));
  ps.add("unused", Tensor<double>({2}, 1.0));
  Tape<double> t;
  auto p = t.param(ps, "used");
  CHECK_THROWS_AS(t.backward(square(p)), ContractError);
  ps.grad("unused").fill(5.0);
  ps.zero_grad();
  t.backward(sum(square(p)));
  for (double g : ps.grad("unused").data()) CHECK(g == 0.0);
}

TEST_CASE("repeated backward on one tape is deterministic") {
  ParamStore<double> ps;
  ps.add("w", oracle::random_tensor({2, 2, 3, 3}, 1));
  Tape<double> t;
  auto x = t.constant(oracle::random_tensor({2, 5, 5}, 2));
  auto loss = sum(tanh(conv2d(x, t.param(ps, "w"), static_cast<const Var<double>*>(nullptr))));
  t.backward(loss);
  const auto g1 = ps.grad("w");
  ps.zero_grad();
  t.backward(loss);
  CHECK(ps.grad("w") == g1);
}

TEST_CASE("gradient of a sum equals the sum of gradients") {
  ParamStore<double> ps;
  ps.add("p", oracle::random_tensor({4, 3}, 7));
  auto l1 = [&](Tape<double>& t) { return sum(sigmoid(t.param(ps, "p"))); };
  auto l2 = [&](Tape<double>& t) { return sum(square(gelu(t.param(ps, "p")))); };
  Tape<double> ta, tb, tc;
  ta.backward(l1(ta));
  const auto ga = ps.grad("p");
  ps.zero_grad();
  tb.backward(l2(tb));
  const auto gb = ps.grad("p");
  ps.zero_grad();
  tc.backward(add(l1(tc), l2(tc)));
  for (std::size_t i = 0; i < ga.numel(); ++i) CHECK(ps.grad("p")[i] == ga[i] + gb[i]);
}

TEST_CASE("fd_check on a quadratic is exact up to rounding") {
  const auto x = oracle::random_tensor({10}, 3);
  const auto r = fd_check<double>([](Tape<double>&, const Var<double>& v) { return sum(square(v)); }, x);
  CHECK(r.max_rel_error <= 1e-9);
  CHECK(r.checked == 10);
}

TEST_CASE("fd_check flags non-finite evaluations") {
  const Tensor<double> x({1}, 1e-7);
  CHECK_THROWS(fd_check<double>([](Tape<double>&, const Var<double>& v) { return sum(log(v)); }, x, 1e-6));
}

TEST_CASE("every elementwise and structural op passes the oracle over seeds") {
  using Fn = ScalarFn<double>;
  const std::vector<std::pair<const char*, Fn>> ops = {
      {"sigmoid", [](Tape<double>&, const Var<double>& v) { return sum(sigmoid(v)); }},
      {"tanh", [](Tape<double>&, const Var<double>& v) { return sum(tanh(v)); }},
      {"gelu", [](Tape<double>&, const Var<double>& v) { return sum(gelu(v)); }},
      {"exp", [](Tape<double>&, const Var<double>& v) { return sum(exp(v)); }},
      {"log", [](Tape<double>&, const Var<double>& v) { return sum(log(add_scalar(square(v), 0.5))); }},
      {"abs", [](Tape<double>&, const Var<double>& v) { return sum(abs(v)); }},
      {"mean", [](Tape<double>&, const Var<double>& v) { return mean(mul(v, sigmoid(v))); }},
      {"slice+concat",
       [](Tape<double>&, const Var<double>& v) {
         auto a = slice(v, 0, 1), b = slice(v, 1, 3);
         return sum(square(concat<double>({b, scale(a, 3.0), b})));
       }},
      {"mul_channels",
       [](Tape<double>&, const Var<double>& v) {
         auto g = reshape(slice(v, 0, 1), {4, 5});
         return sum(tanh(mul_channels(v, g)));
       }},
      {"conv2d",
       [](Tape<double>& t, const Var<double>& v) {
         auto k = t.constant(oracle::random_tensor({2, 3, 3, 3}, 77));
         auto b = t.constant(oracle::random_tensor({2}, 78));
         return sum(square(conv2d(v, k, &b)));
       }},
      {"avg_pool2d", [](Tape<double>&, const Var<double>& v) {
         return sum(square(avg_pool2d(slice(v, 0, 2), 1)));
       }},
      {"upsample2x", [](Tape<double>&, const Var<double>& v) { return sum(tanh(upsample2x(v))); }},
  };
  for (const auto& [name, f] : ops) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      CAPTURE(name);
      CAPTURE(seed);
      const auto x = oracle::random_tensor({3, 4, 5}, 1000 + seed);
      CHECK(fd_check<double>(f, x).max_rel_error <= 1e-5);
    }
  }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = oracle::random_tensor({2, 8, 8}, 2000 + seed);
    for (int k : {2, 4, 8}) {
      CHECK(fd_check<double>([k](Tape<double>&, const Var<double>& v) { return sum(square(avg_pool2d(v, k))); }, x)
                .max_rel_error <= 1e-5);
    }
  }
}

TEST_CASE("parameter fd_check") {
  ParamStore<double> ps;
  ps.add("w", oracle::random_tensor({3, 2, 3, 3}, 4));
  ps.add("b", oracle::random_tensor({3}, 5));
  const auto x = oracle::random_tensor({2, 6, 6}, 6);
  auto loss = [&](Tape<double>& t) {
    auto b = t.param(ps, "b");
    return mean(gelu(conv2d(t.constant(x), t.param(ps, "w"), &b)));
  };
  CHECK(fd_check_param<double>(ps, "w", loss).max_rel_error <= 1e-5);
  CHECK(fd_check_param<double>(ps, "b", loss).max_rel_error <= 1e-5);
  CHECK(fd_check_param<double>(ps, "w", loss, 1e-6, 5, 3).checked == 5);
}

TEST_CASE("Adam") {
  ParamStore<double> ps;
  ps.add("x", Tensor<double>({2}, {3.0, -2.0}));
  SUBCASE("zero learning rate leaves parameters bit-identical") {
    Adam<double> opt({.lr = 0.0});
    const auto before = ps.value("x");
    for (int i = 0; i < 5; ++i) {
      ps.zero_grad();
      Tape<double> t;
      t.backward(sum(square(t.param(ps, "x"))));
      opt.step(ps);
    }
    CHECK(ps.value("x") == before);
  }
  SUBCASE("minimises a quadratic") {
    Adam<double> opt({.lr = 0.05, .clip_norm = 0.0});
    for (int i = 0; i < 500; ++i) {
      ps.zero_grad();
      Tape<double> t;
      t.backward(sum(square(t.param(ps, "x"))));
      opt.step(ps);
    }
    CHECK(std::abs(ps.value("x")[0]) < 0.05);
    CHECK(std::abs(ps.value("x")[1]) < 0.05);
  }
  SUBCASE("first step has magnitude lr for any gradient scale") {
    Adam<double> opt({.lr = 0.01, .clip_norm = 1.0});
    ps.grad("x") = Tensor<double>({2}, {400.0, -300.0});
    const double norm = opt.step(ps);
    CHECK(norm == doctest::Approx(500.0));
    CHECK(ps.value("x")[0] == doctest::Approx(3.0 - 0.01).epsilon(1e-6));
    CHECK(ps.value("x")[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-6));
  }
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "lgu_test_ckpt";
  ParamStore<float> a(42);
  a.add("enc.w", oracle::random_tensor({4, 2, 3, 3}, 1).cast<float>());
  a.add("enc.b", oracle::random_tensor({4}, 2).cast<float>());
  a.set_step(17);
  save_checkpoint(a, dir);
  ParamStore<float> b;
  b.add("enc.w", Tensor<float>({4, 2, 3, 3}));
  b.add("enc.b", Tensor<float>({4}));
  load_checkpoint(b, dir);
  CHECK(b.value("enc.w") == a.value("enc.w"));
  CHECK(b.value("enc.b") == a.value("enc.b"));
  CHECK(b.seed() == 42);
  CHECK(b.step() == 17);
  ParamStore<float> c;
  c.add("enc.w", Tensor<float>({4, 2, 3, 3}));
  CHECK_THROWS_AS(load_checkpoint(c, dir), ContractError);
  std::filesystem::remove_all(dir);
}
