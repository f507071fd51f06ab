// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dbae/errors.hpp"

namespace dbae {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "," : "") << shape[i];
  out << ')';
  return out.str();
}

/// Dense row-major array. `T` fixes the precision: float for training,
/// double for oracle and property checks.
///
/// Most numeric code treats tensors as matrices: a rank-2 tensor is
/// (rows x cols), rank 1 is a single row and rank 0 is 1x1.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {
    check_shape();
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape();
    if (data_.size() != shape_numel(shape_)) {
      throw ShapeError("Tensor: buffer of " + std::to_string(data_.size()) +
                       " elements does not match shape " + shape_str(shape_));
    }
  }

  static Tensor matrix(std::size_t rows, std::size_t cols, T fill = T(0)) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor scalar(T value) { return Tensor({1, 1}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const { return shape_.size() == 2 ? shape_[0] : (shape_.size() > 2 ? shape_[0] : 1); }
  std::size_t cols() const {
    if (shape_.empty()) return 1;
    if (shape_.size() == 1) return shape_[0];
    return data_.size() / shape_[0];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& buffer() { return data_; }
  const std::vector<T>& buffer() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols(), cols());
  }

  /// Same buffer viewed as (rows x cols); sizes must agree.
  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
      throw ShapeError("Tensor::reshaped: cannot view " + shape_str(shape_) + " as " +
                       shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  Tensor as_matrix() const { return reshaped({rows(), cols()}); }

  template <class U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  /// Rows [begin, begin + count) as a new (count x cols) tensor.
  Tensor rows_slice(std::size_t begin, std::size_t count) const {
    const std::size_t c = cols();
    if (begin + count > rows()) throw ShapeError("Tensor::rows_slice: out of range");
    std::vector<T> out(data_.begin() + static_cast<std::ptrdiff_t>(begin * c),
                       data_.begin() + static_cast<std::ptrdiff_t>((begin + count) * c));
    return Tensor({count, c}, std::move(out));
  }

  Tensor gather_rows(std::span<const std::size_t> index) const {
    const std::size_t c = cols();
    Tensor out({index.size(), c});
    for (std::size_t i = 0; i < index.size(); ++i) {
      if (index[i] >= rows()) throw ShapeError("Tensor::gather_rows: index out of range");
      std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(index[i] * c), c,
                  out.data_.begin() + static_cast<std::ptrdiff_t>(i * c));
    }
    return out;
  }

  bool all_finite() const {
    for (T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void check_shape() const {
    for (std::size_t s : shape_)
      if (s == 0) throw ShapeError("Tensor: zero-length dimension in " + shape_str(shape_));
  }

  Shape shape_;
  std::vector<T> data_;
};

template <class T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* where) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(where) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Elementwise helpers used by the closed-form math; they do not record on a tape.

template <class T>
Tensor<T> axpby(double a, const Tensor<T>& x, double b, const Tensor<T>& y) {
  require_same_shape(x, y, "axpby");
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<T>(a * static_cast<double>(x[i]) + b * static_cast<double>(y[i]));
  return out;
}

template <class T>
Tensor<T> scaled(const Tensor<T>& x, double a) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<T>(a * static_cast<double>(x[i]));
  return out;
}

template <class T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "operator+");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <class T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "operator-");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

template <class T>
double squared_norm(const Tensor<T>& a) {
  double s = 0;
  for (T v : a.values()) s += static_cast<double>(v) * static_cast<double>(v);
  return s;
}

template <class T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

}  // namespace dbae
