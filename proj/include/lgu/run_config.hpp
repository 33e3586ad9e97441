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
#include <string>
#include <vector>

#include "lgu/training.hpp"

namespace lgu {

// Flat key = value configuration shared by every subcommand. Defaults of the method
// constants (alpha, beta, mask_scale, offset_bound, lambda_flow, lambda_self, iterations)
// are the reference values; r1 is always derived from the grid.
struct RunConfig {
  TrainConfig train;  // grid, widths, hyperparameters, corpus, seed, out_dir
  DType dtype = DType::f32;
  int threads = 1;
  bool deterministic = true;
  std::vector<std::size_t> bench_sizes{32, 48, 64, 96};
  std::size_t bench_channels = 32;
  std::size_t bench_repeat = 5;
  std::size_t gradcheck_seeds = 10;

  // Sets one key from its text form; unknown keys, r1 and malformed values throw ConfigError.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  // Parses "key = value" lines; '#' starts a comment. A key may appear once per text.
  void merge_text(const std::string& text, const std::string& origin = "<text>");
  void merge_file(const std::filesystem::path& path);
  // Applies LGU_DTYPE when set (f32 or f64).
  void apply_env();
  void validate() const;

  int r1() const;
  // Every key with its current value, in documentation order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_json() const;

  static std::vector<std::pair<std::string, std::string>> documentation();
};

DType parse_dtype(const std::string& s);

}  // namespace lgu
