// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dbae/tensor.hpp"

namespace dbae {

/// "DBT1" | dtype u8 (0 = f32, 1 = f64) | ndim u8 | ndim x u32 LE | payload LE.
enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

struct TensorData {
  Dtype dtype = Dtype::f32;
  Shape shape;
  std::vector<float> f32;
  std::vector<double> f64;

  /// Converts to the requested precision (exact when it matches dtype).
  template <class T>
  Tensor<T> as() const {
    if (dtype == Dtype::f32) return Tensor<T>(shape, std::vector<T>(f32.begin(), f32.end()));
    return Tensor<T>(shape, std::vector<T>(f64.begin(), f64.end()));
  }
};

template <class T>
std::vector<std::uint8_t> encode_tensor(const Tensor<T>& t);
TensorData decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& what = "tensor");

template <class T>
void write_tensor_file(const std::string& path, const Tensor<T>& t);
TensorData read_tensor_file(const std::string& path);

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);

// Little-endian scalar helpers shared by the binary formats.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);
std::uint32_t get_u32(const std::uint8_t* p);
std::uint64_t get_u64(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);
double get_f64(const std::uint8_t* p);

}  // namespace dbae
