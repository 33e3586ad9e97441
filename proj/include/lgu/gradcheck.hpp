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
#include <string>
#include <vector>

namespace lgu {

struct GradcheckResult {
  std::string op;
  double max_rel_error = 0;
  double tolerance = 0;
  std::size_t seeds = 0;
  std::size_t coords = 0;  // coordinates compared, summed over seeds and inputs
  double wall_ms = 0;
  bool pass = false;

  std::string to_json() const;
};

// Names of every registered check: one per differentiable op, then "pipeline" (the full
// unrolled loss over all parameters).
std::vector<std::string> gradcheck_ops();

// Central-difference check in f64 with h = 1e-6 on small random instances, one per seed in
// [base_seed, base_seed + seeds). Per-op tolerance 1e-5, pipeline 1e-4.
GradcheckResult run_gradcheck(const std::string& op, std::size_t seeds, std::uint64_t base_seed = 0);

}  // namespace lgu
