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

#include "lgu/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lgu {

namespace {

constexpr std::uint8_t kMagic[4] = {'L', 'G', 'U', 'T'};
constexpr std::size_t kPreambleSize = 7;

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

template <Real T>
using Bits = std::conditional_t<std::is_same_v<T, float>, std::uint32_t, std::uint64_t>;

template <Real T>
Tensor<T> decode_payload(std::span<const std::uint8_t> bytes, std::size_t offset, Shape shape) {
  const std::size_t n = shape_numel(shape);
  const std::size_t need = n * sizeof(T);
  if (bytes.size() - offset < need) {
    throw FormatError("truncated payload: expected " + std::to_string(need) + " bytes, found " +
                          std::to_string(bytes.size() - offset),
                      bytes.size());
  }
  if (bytes.size() - offset > need) throw FormatError("trailing bytes after payload", offset + need);
  std::vector<T> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = std::bit_cast<T>(get_le<Bits<T>>(bytes.data() + offset + i * sizeof(T)));
  return Tensor<T>(std::move(shape), std::move(data));
}

}  // namespace

template <Real T>
std::vector<std::uint8_t> encode_tensor(const Tensor<T>& t) {
  if (t.ndim() > 255) throw ShapeError("tensor rank exceeds 255");
  std::vector<std::uint8_t> out;
  out.reserve(kPreambleSize + 8 * t.ndim() + t.numel() * sizeof(T));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(kTensorFormatVersion);
  out.push_back(static_cast<std::uint8_t>(dtype_of<T>()));
  out.push_back(static_cast<std::uint8_t>(t.ndim()));
  for (std::size_t e : t.shape()) put_le<std::uint64_t>(out, e);
  for (T v : t.data()) put_le<Bits<T>>(out, std::bit_cast<Bits<T>>(v));
  return out;
}

AnyTensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("truncated header", bytes.size());
  for (std::size_t i = 0; i < 4; ++i) {
    if (bytes[i] != kMagic[i]) throw FormatError("bad magic, expected \"LGUT\"", i);
  }
  if (bytes.size() < kPreambleSize) throw FormatError("truncated header", bytes.size());
  if (bytes[4] != kTensorFormatVersion) {
    throw FormatError("unsupported version " + std::to_string(bytes[4]), 4);
  }
  const std::uint8_t dtype = bytes[5];
  if (dtype > 1) throw FormatError("bad dtype byte " + std::to_string(dtype), 5);
  const std::size_t ndim = bytes[6];
  std::size_t offset = kPreambleSize;
  Shape shape(ndim);
  const std::size_t elem = dtype == 0 ? sizeof(float) : sizeof(double);
  std::size_t numel = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    if (bytes.size() < offset + 8) throw FormatError("truncated extents", bytes.size());
    shape[d] = static_cast<std::size_t>(get_le<std::uint64_t>(bytes.data() + offset));
    if (__builtin_mul_overflow(numel, shape[d], &numel) || numel > bytes.size() / elem + 1) {
      throw FormatError("extents exceed payload size", offset);
    }
    offset += 8;
  }
  if (dtype == 0) return decode_payload<float>(bytes, offset, std::move(shape));
  return decode_payload<double>(bytes, offset, std::move(shape));
}

template <Real T>
void save_tensor(const Tensor<T>& t, const std::filesystem::path& path) {
  const auto bytes = encode_tensor(t);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed for " + path.string());
}

AnyTensor load_tensor(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_tensor(bytes);
}

template <Real T>
Tensor<T> load_tensor_as(const std::filesystem::path& path) {
  AnyTensor any = load_tensor(path);
  if (auto* t = std::get_if<Tensor<T>>(&any)) return std::move(*t);
  throw FormatError(path.string() + ": stored dtype is not " + std::string(dtype_name(dtype_of<T>())), 5);
}

template std::vector<std::uint8_t> encode_tensor(const Tensor<float>&);
template std::vector<std::uint8_t> encode_tensor(const Tensor<double>&);
template void save_tensor(const Tensor<float>&, const std::filesystem::path&);
template void save_tensor(const Tensor<double>&, const std::filesystem::path&);
template Tensor<float> load_tensor_as(const std::filesystem::path&);
template Tensor<double> load_tensor_as(const std::filesystem::path&);

}  // namespace lgu
