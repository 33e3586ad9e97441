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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "lgu/run_config.hpp"

namespace lgu {

// Process exit codes shared by the library entry points and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerification = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitNumeric = 4;

// Receives one JSON document per call.
using LineSink = std::function<void(const std::string&)>;

struct BenchRecord {
  std::string path;  // "materialized" or "onthefly"
  std::size_t h = 0, w = 0, c = 0;
  int r = 0;
  int threads = 1;
  std::size_t repeat = 0;
  double median_ms = 0;
  double mac_estimate = 0;

  std::string to_json() const;
};

struct BenchReport {
  double equivalence_max_abs = 0;  // f64 cross-path check run before timing
  std::vector<BenchRecord> records;
  double slope_materialized = 0;   // log-log slope of median time against H*W
  double slope_onthefly = 0;
};

// Least-squares slope of log(y) against log(x); needs two distinct x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

// Largest |materialized - on-the-fly| over unmasked lookups (with and without offsets) on
// a random f64 instance of the given size.
double lookup_path_gap(std::size_t h, std::size_t w, std::size_t c, int r, std::uint64_t seed);

// Times pyramid construction plus a full fixed lookup for both paths (f32) on square grids.
BenchReport run_bench(const std::vector<std::size_t>& sizes, std::size_t c, int r, std::size_t repeat,
                      std::uint64_t seed, int threads);

// Each returns an exit code and throws ConfigError / NumericError / IoError on failure.
int cmd_gradcheck(const RunConfig& cfg, const LineSink& out);
int cmd_bench(const RunConfig& cfg, const LineSink& out);
int cmd_train(const RunConfig& cfg, const LineSink& out);
// checkpoint may be empty (untrained parameters).
int cmd_demo(const RunConfig& cfg, std::uint64_t scene_seed, const std::filesystem::path& checkpoint,
             const LineSink& out);
int cmd_eval(const RunConfig& cfg, const std::filesystem::path& checkpoint, const LineSink& out);

}  // namespace lgu
