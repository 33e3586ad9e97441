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
#include <span>
#include <variant>
#include <vector>

#include "lgu/tensor.hpp"

namespace lgu {

// Tensor file layout (all integers and floats little-endian):
//   "LGUT" | u8 version (=1) | u8 dtype (0=f32, 1=f64) | u8 ndim | ndim x u64 extents | row-major payload
inline constexpr std::uint8_t kTensorFormatVersion = 1;

using AnyTensor = std::variant<Tensor<float>, Tensor<double>>;

template <Real T>
std::vector<std::uint8_t> encode_tensor(const Tensor<T>& t);

AnyTensor decode_tensor(std::span<const std::uint8_t> bytes);

template <Real T>
void save_tensor(const Tensor<T>& t, const std::filesystem::path& path);

AnyTensor load_tensor(const std::filesystem::path& path);

// Loads and requires the stored dtype to be T.
template <Real T>
Tensor<T> load_tensor_as(const std::filesystem::path& path);

}  // namespace lgu
