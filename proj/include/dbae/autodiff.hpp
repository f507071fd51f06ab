// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dbae/tensor.hpp"

namespace dbae::ad {

template <class T>
class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Gradients keyed by parameter name.
template <class T>
using Gradients = std::map<std::string, Tensor<T>>;

/// Linear record of primitive ops for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so reverse insertion order is a
/// reverse topological order. A node only stores a backward closure when one
/// of its inputs needs a gradient; a tape built with record = false is a
/// plain forward evaluator.
template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  /// When set, every op checks its output and throws NumericFault on NaN/Inf.
  void set_check_finite(bool on) { check_finite_ = on; }

  Var<T> constant(Tensor<T> value);
  /// Leaf whose gradient is reported under `name`. Binding the same name more
  /// than once accumulates into one gradient.
  Var<T> param(const std::string& name, const Tensor<T>& value);

  /// Appends an op node. `fn` is dropped if no parent requires a gradient.
  Var<T> push(Tensor<T> value, const std::vector<std::size_t>& parents, BackwardFn fn);

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient accumulator of a node, zero-initialized on first access.
  Tensor<T>& grad(std::size_t id);
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a 1x1 loss. Returns gradients of every parameter bound
  /// on this tape; parameters the loss does not reach get zeros.
  Gradients<T> backward(Var<T> loss);

  /// Gradient of the last backward() with respect to an arbitrary node
  /// (zeros if unreached).
  Tensor<T> grad_of(Var<T> v) const;

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool has_grad = false;
    bool requires_grad = false;
    BackwardFn backward;
    std::string name;
  };

  std::vector<Node> nodes_;
  bool record_;
  bool check_finite_ = false;
};

// Elementwise binaries broadcast numpy-style over (rows, cols): a dimension of
// size 1 stretches to match the other operand.
template <class T> Var<T> add(Var<T> a, Var<T> b);
template <class T> Var<T> sub(Var<T> a, Var<T> b);
template <class T> Var<T> mul(Var<T> a, Var<T> b);

template <class T> Var<T> scale(Var<T> a, double c);
template <class T> Var<T> add_scalar(Var<T> a, double c);

template <class T> Var<T> matmul(Var<T> a, Var<T> b);
/// x W + b with W (in x out) and b (1 x out).
template <class T> Var<T> linear(Var<T> x, Var<T> w, Var<T> b);

template <class T> Var<T> silu(Var<T> a);
template <class T> Var<T> softplus(Var<T> a);
template <class T> Var<T> sigmoid(Var<T> a);
template <class T> Var<T> tanh(Var<T> a);
template <class T> Var<T> exp(Var<T> a);
template <class T> Var<T> log(Var<T> a);
template <class T> Var<T> square(Var<T> a);
template <class T> Var<T> abs(Var<T> a);

/// Sum of all entries, 1x1.
template <class T> Var<T> sum(Var<T> a);
template <class T> Var<T> mean(Var<T> a);
/// Per-row sum, (rows x 1).
template <class T> Var<T> row_sum(Var<T> a);
/// Per-row log-sum-exp, (rows x 1).
template <class T> Var<T> row_logsumexp(Var<T> a);

template <class T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
template <class T> Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count);
template <class T> Var<T> transpose(Var<T> a);

/// mean((a - b)^2) over all entries.
template <class T> Var<T> mse(Var<T> a, Var<T> b);

template <class T> Var<T> operator+(Var<T> a, Var<T> b) { return add(a, b); }
template <class T> Var<T> operator-(Var<T> a, Var<T> b) { return sub(a, b); }
template <class T> Var<T> operator*(Var<T> a, Var<T> b) { return mul(a, b); }

}  // namespace dbae::ad
