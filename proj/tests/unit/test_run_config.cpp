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
#include <cstdlib>

#include "doctest.h"
#include "lgu/commands.hpp"
#include "lgu/run_config.hpp"

using namespace lgu;

TEST_CASE("defaults carry the reference constants") {
  const RunConfig c;
  CHECK(c.get("alpha") == "5");
  CHECK(c.get("beta") == "0.05");
  CHECK(c.get("mask_scale") == "3");
  CHECK(c.get("offset_bound") == "4");
  CHECK(c.get("lambda_flow") == "0.05");
  CHECK(c.get("lambda_self") == "0.08");
  CHECK(c.get("iterations") == "8");
  CHECK(c.get("gamma") == "0.9");
  CHECK(c.get("batch") == "2");
  CHECK(c.get("height") == "48");
  CHECK(c.get("width") == "64");
  CHECK(c.get("channels") == "32");
  CHECK(c.r1() == 7);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("r1 is derived from the grid only") {
  RunConfig c;
  CHECK_THROWS_AS(c.set("r1", "3"), ConfigError);
  c.set("height", "32");
  c.set("width", "32");
  CHECK(c.get("r1") == "4");
  c.set("height", "16");
  c.set("width", "8");
  CHECK(c.r1() == 2);  // 24 / 16 = 1.5 rounds away from zero
}

TEST_CASE("text parsing") {
  RunConfig c;
  c.merge_text("# header\n  seed = 42  # trailing\n\nuse_kan=false\nchannels = 8\nbench_sizes = 16, 24\n");
  CHECK(c.train.seed == 42);
  CHECK_FALSE(c.train.model.use_kan);
  CHECK(c.train.model.channels == 8);
  CHECK(c.train.scene.channels == 8);
  CHECK(c.bench_sizes == std::vector<std::size_t>{16, 24});

  CHECK_THROWS_AS(RunConfig().merge_text("nope = 1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_text("seed = 1\nseed = 2\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_text("seed\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_text("seed = -1\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_text("alpha = 1x\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_text("alpha = nan\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_text("use_lgu = maybe\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_text("corr_mode = sparse\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_text("dtype = f16\n"), ConfigError);
  CHECK_THROWS_AS(RunConfig().merge_file("/nonexistent/file.cfg"), ConfigError);
  try {
    RunConfig().merge_text("seed = 1\nbogus = 2\n", "x.cfg");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.cfg:2") != std::string::npos);
  }
}

TEST_CASE("every key round-trips through its text form") {
  RunConfig a;
  a.merge_text("seed = 5\nlr = 0.0003\nuse_deform = false\ncorr_mode = onthefly\ndtype = f64\nout_dir = /tmp/x\n");
  RunConfig b;
  std::string text;
  for (const auto& [k, v] : a.entries()) text += k + " = " + v + "\n";
  b.merge_text(text);
  CHECK(a.to_json() == b.to_json());
  CHECK(RunConfig::documentation().size() == a.entries().size());
}

TEST_CASE("validation") {
  RunConfig c;
  c.set("height", "44");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig();
  c.set("threads", "0");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig();
  c.set("bench_sizes", "16,20");
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig();
  c.set("offset_bound", "0");
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("dtype environment override") {
  RunConfig c;
  ::setenv("LGU_DTYPE", "f64", 1);
  c.apply_env();
  CHECK(c.dtype == DType::f64);
  ::setenv("LGU_DTYPE", "f8", 1);
  CHECK_THROWS_AS(c.apply_env(), ConfigError);
  ::unsetenv("LGU_DTYPE");
  c.set("dtype", "f32");
  c.apply_env();
  CHECK(c.dtype == DType::f32);
}

TEST_CASE("log-log slope") {
  const std::vector<double> x{1, 2, 4, 8};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.5));
  CHECK(loglog_slope(x, y) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK_THROWS_AS(loglog_slope({1}, {1}), ContractError);
  CHECK_THROWS_AS(loglog_slope({2, 2}, {1, 3}), ContractError);
}

TEST_CASE("bench") {
  CHECK(lookup_path_gap(16, 16, 4, 2, 1) <= 1e-10);
  const auto one = run_bench({16}, 4, 1, 1, 0, 1);
  REQUIRE(one.records.size() == 2);
  CHECK(one.records[0].path == "materialized");
  CHECK(one.records[1].path == "onthefly");
  CHECK(one.equivalence_max_abs <= 1e-10);
  for (const auto& r : one.records) {
    CHECK(r.median_ms > 0);
    const auto j = r.to_json();
    for (const char* k : {"\"path\"", "\"H\"", "\"W\"", "\"C\"", "\"r\"", "\"threads\"", "\"repeat\"", "\"median_ms\"",
                          "\"mac_estimate\""}) {
      CHECK(j.find(k) != std::string::npos);
    }
  }
}
