// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dbae {

namespace {
constexpr char kMagic[4] = {'D', 'B', 'T', '1'};
constexpr std::size_t kMaxRank = 16;
}  // namespace

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}
std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}
float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }
double get_f64(const std::uint8_t* p) { return std::bit_cast<double>(get_u64(p)); }

std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path);
}

template <class T>
std::vector<std::uint8_t> encode_tensor(const Tensor<T>& t) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  if (t.rank() > kMaxRank) throw ShapeError("TensorFile: rank too large");
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(static_cast<std::uint8_t>(std::is_same_v<T, float> ? Dtype::f32 : Dtype::f64));
  out.push_back(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t s : t.shape()) {
    if (s > 0xffffffffu) throw ShapeError("TensorFile: dimension exceeds u32");
    put_u32(out, static_cast<std::uint32_t>(s));
  }
  out.reserve(out.size() + t.size() * sizeof(T));
  for (T v : t.values()) {
    if constexpr (std::is_same_v<T, float>) put_f32(out, v);
    else put_f64(out, v);
  }
  return out;
}

TensorData decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& what) {
  if (bytes.size() < 6) throw TruncationError(what + ": header", 6, bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw MagicMismatchError(what + ": not a DBT1 tensor file");
  TensorData d;
  const std::uint8_t code = bytes[4];
  if (code > 1) throw DataError(what + ": unknown dtype code " + std::to_string(code));
  d.dtype = static_cast<Dtype>(code);
  const std::size_t ndim = bytes[5];
  const std::size_t header = 6 + 4 * ndim;
  if (bytes.size() < header) throw TruncationError(what + ": shape", header, bytes.size());
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    const std::uint32_t s = get_u32(bytes.data() + 6 + 4 * i);
    if (s == 0) throw DataError(what + ": zero-length dimension");
    d.shape.push_back(s);
    count *= s;
  }
  const std::size_t width = d.dtype == Dtype::f32 ? 4 : 8;
  const std::size_t expected = header + count * width;
  if (bytes.size() < expected) throw TruncationError(what + ": payload", expected, bytes.size());
  if (bytes.size() > expected)
    throw DataError(what + ": " + std::to_string(bytes.size() - expected) + " trailing bytes");
  const std::uint8_t* p = bytes.data() + header;
  if (d.dtype == Dtype::f32) {
    d.f32.resize(count);
    for (std::size_t i = 0; i < count; ++i) d.f32[i] = get_f32(p + 4 * i);
  } else {
    d.f64.resize(count);
    for (std::size_t i = 0; i < count; ++i) d.f64[i] = get_f64(p + 8 * i);
  }
  return d;
}

template <class T>
void write_tensor_file(const std::string& path, const Tensor<T>& t) {
  write_file_bytes(path, encode_tensor(t));
}

TensorData read_tensor_file(const std::string& path) { return decode_tensor(read_file_bytes(path), path); }

template std::vector<std::uint8_t> encode_tensor(const Tensor<float>&);
template std::vector<std::uint8_t> encode_tensor(const Tensor<double>&);
template void write_tensor_file(const std::string&, const Tensor<float>&);
template void write_tensor_file(const std::string&, const Tensor<double>&);

}  // namespace dbae
