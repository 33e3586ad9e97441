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

#include <cstddef>
#include <functional>

namespace lgu {

// Worker count used by grid-parallel kernels. Values < 1 are clamped to 1.
void set_num_threads(int n);
int num_threads();

// Keeps freed large blocks in the heap so repeated volume-sized allocations reuse
// already-mapped pages. Process-wide; a no-op on non-glibc platforms.
void tune_allocator();

// Runs fn(lo, hi) over a static partition of [0, n). Each index is owned by
// exactly one chunk, so per-index outputs are identical to a serial run.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace lgu
