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

// Private helpers for vectorized elementwise kernels.

#include <Eigen/Core>
#include <algorithm>
#include <cstddef>
#include <unsupported/Eigen/SpecialFunctions>
#include <utility>

#include "lgu/tensor.hpp"

namespace lgu::detail {

template <Real T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>, Eigen::Aligned64>;
template <Real T>
using CArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>, Eigen::Aligned64>;

// dst[i] = f(src0, src1, ...)[i], evaluated through fixed aligned buffers so that Eigen's
// choice between packet and scalar code depends only on the index, never on addresses.
template <Real T, typename F, typename... Src, std::size_t... I>
void chunked_impl(T* dst, std::size_t n, F& f, std::index_sequence<I...>, const Src*... src) {
  constexpr std::size_t kChunk = 512;
  alignas(64) T in[sizeof...(Src)][kChunk];
  alignas(64) T out[kChunk];
  const T* srcs[] = {src...};
  for (std::size_t o = 0; o < n; o += kChunk) {
    const std::size_t m = std::min(kChunk, n - o);
    for (std::size_t k = 0; k < sizeof...(Src); ++k) std::copy(srcs[k] + o, srcs[k] + o + m, in[k]);
    const auto em = static_cast<Eigen::Index>(m);
    ArrayMap<T>(out, em) = f(CArrayMap<T>(in[I], em)...);
    std::copy(out, out + m, dst + o);
  }
}

template <Real T, typename F, typename... Src>
void chunked(T* dst, std::size_t n, F f, const Src*... src) {
  chunked_impl<T>(dst, n, f, std::index_sequence_for<Src...>{}, src...);
}

}  // namespace lgu::detail
