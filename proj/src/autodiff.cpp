// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

namespace dbae::ad {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

template <class T>
ConstMapMat<T> as_mat(const Tensor<T>& t) {
  return ConstMapMat<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}
template <class T>
MapMat<T> as_mat(Tensor<T>& t) {
  return MapMat<T>(t.data(), static_cast<Eigen::Index>(t.rows()),
                   static_cast<Eigen::Index>(t.cols()));
}

template <class T>
void same_tape(Var<T> a, Var<T> b, const char* where) {
  if (a.tape != b.tape || a.tape == nullptr) throw ContractError(std::string(where) + ": vars from different tapes");
}

std::size_t broadcast_dim(std::size_t a, std::size_t b, const char* where) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ShapeError(std::string(where) + ": cannot broadcast " + std::to_string(a) + " against " +
                   std::to_string(b));
}

// Elementwise binary with broadcasting. FwdFn(x, y) -> z; DaFn/DbFn(x, y, z) -> partials.
template <class T, class Fwd, class Da, class Db>
Var<T> binary(Var<T> a, Var<T> b, const char* name, Fwd fwd, Da da, Db db) {
  same_tape(a, b, name);
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  const std::size_t ar = av.rows(), ac = av.cols(), br = bv.rows(), bc = bv.cols();
  const std::size_t r = broadcast_dim(ar, br, name), c = broadcast_dim(ac, bc, name);
  Tensor<T> out = Tensor<T>::matrix(r, c);
  const bool fast = ar == br && ac == bc;
  if (fast) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = fwd(av[k], bv[k]);
  } else {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        out(i, j) = fwd(av((ar == 1 ? 0 : i), (ac == 1 ? 0 : j)), bv((br == 1 ? 0 : i), (bc == 1 ? 0 : j)));
  }
  const std::size_t ia = a.id, ib = b.id;
  return tape.push(std::move(out), {ia, ib}, [=](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& x = tp.value(ia);
    const Tensor<T>& y = tp.value(ib);
    const Tensor<T>& z = tp.value(self);
    const Tensor<T> g = tp.grad(self);
    const bool need_a = tp.requires_grad(ia), need_b = tp.requires_grad(ib);
    if (fast) {
      if (need_a) {
        Tensor<T>& ga = tp.grad(ia);
        for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * da(x[k], y[k], z[k]);
      }
      if (need_b) {
        Tensor<T>& gb = tp.grad(ib);
        for (std::size_t k = 0; k < g.size(); ++k) gb[k] += g[k] * db(x[k], y[k], z[k]);
      }
      return;
    }
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) {
        const std::size_t xi = ar == 1 ? 0 : i, xj = ac == 1 ? 0 : j;
        const std::size_t yi = br == 1 ? 0 : i, yj = bc == 1 ? 0 : j;
        const T gv = g(i, j);
        if (need_a) tp.grad(ia)(xi, xj) += gv * da(x(xi, xj), y(yi, yj), z(i, j));
        if (need_b) tp.grad(ib)(yi, yj) += gv * db(x(xi, xj), y(yi, yj), z(i, j));
      }
    }
  });
}

// Elementwise unary. Fwd(x) -> y; Dfn(x, y) -> dy/dx.
template <class T, class Fwd, class Dfn>
Var<T> unary(Var<T> a, Fwd fwd, Dfn dfn) {
  Tape<T>& tape = *a.tape;
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.shape());
  for (std::size_t k = 0; k < av.size(); ++k) out[k] = fwd(av[k]);
  const std::size_t ia = a.id;
  return tape.push(std::move(out), {ia}, [=](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& x = tp.value(ia);
    const Tensor<T>& y = tp.value(self);
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& ga = tp.grad(ia);
    for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * dfn(x[k], y[k]);
  });
}

template <class T>
T stable_softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <class T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape

template <class T>
Var<T> Tape<T>::constant(Tensor<T> value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var<T>{this, nodes_.size() - 1};
}

template <class T>
Var<T> Tape<T>::param(const std::string& name, const Tensor<T>& value) {
  Node n;
  n.value = value;
  n.requires_grad = record_;
  n.name = name;
  nodes_.push_back(std::move(n));
  return Var<T>{this, nodes_.size() - 1};
}

template <class T>
Var<T> Tape<T>::push(Tensor<T> value, const std::vector<std::size_t>& parents, BackwardFn fn) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericFault("autodiff: non-finite value produced at node " + std::to_string(nodes_.size()));
  }
  Node n;
  n.value = std::move(value);
  if (record_) {
    for (std::size_t p : parents) n.requires_grad = n.requires_grad || nodes_[p].requires_grad;
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var<T>{this, nodes_.size() - 1};
}

template <class T>
Tensor<T>& Tape<T>::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor<T>(n.value.shape(), T(0));
    n.has_grad = true;
  }
  return n.grad;
}

template <class T>
Gradients<T> Tape<T>::backward(Var<T> loss) {
  if (loss.tape != this) throw ContractError("backward: loss is not on this tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_str(loss.value().shape()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor<T>();
  }
  grad(loss.id)[0] = T(1);
  for (std::size_t k = loss.id + 1; k-- > 0;) {
    Node& n = nodes_[k];
    if (n.has_grad && n.backward) n.backward(*this, k);
  }
  Gradients<T> out;
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    const Node& n = nodes_[k];
    if (n.name.empty()) continue;
    auto it = out.find(n.name);
    if (it == out.end()) {
      out.emplace(n.name, n.has_grad ? n.grad : Tensor<T>(n.value.shape(), T(0)));
    } else if (n.has_grad) {
      Tensor<T>& acc = it->second;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += n.grad[i];
    }
  }
  return out;
}

template <class T>
Tensor<T> Tape<T>::grad_of(Var<T> v) const {
  const Node& n = nodes_[v.id];
  return n.has_grad ? n.grad : Tensor<T>(n.value.shape(), T(0));
}

// ---------------------------------------------------------------------------
// Binary ops

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  return binary(
      a, b, "add", [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(1); });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  return binary(
      a, b, "sub", [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(-1); });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  return binary(
      a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <class T>
Var<T> scale(Var<T> a, double c) {
  const T k = static_cast<T>(c);
  return unary(a, [k](T x) { return k * x; }, [k](T, T) { return k; });
}

template <class T>
Var<T> add_scalar(Var<T> a, double c) {
  const T k = static_cast<T>(c);
  return unary(a, [k](T x) { return x + k; }, [](T, T) { return T(1); });
}

// ---------------------------------------------------------------------------
// Linear algebra

template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  same_tape(a, b, "matmul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ (" + std::to_string(av.cols()) + " vs " +
                     std::to_string(bv.rows()) + ")");
  }
  Tensor<T> out = Tensor<T>::matrix(av.rows(), bv.cols());
  as_mat(out).noalias() = as_mat(av) * as_mat(bv);
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(std::move(out), {ia, ib}, [=](Tape<T>& tp, std::size_t self) {
    const auto g = as_mat(tp.grad(self));
    if (tp.requires_grad(ia)) as_mat(tp.grad(ia)).noalias() += g * as_mat(tp.value(ib)).transpose();
    if (tp.requires_grad(ib)) as_mat(tp.grad(ib)).noalias() += as_mat(tp.value(ia)).transpose() * g;
  });
}

template <class T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> b) {
  same_tape(x, w, "linear");
  same_tape(x, b, "linear");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  const Tensor<T>& bv = b.value();
  if (xv.cols() != wv.rows()) {
    throw ShapeError("linear: input has " + std::to_string(xv.cols()) + " features, weight expects " +
                     std::to_string(wv.rows()));
  }
  if (bv.rows() != 1 || bv.cols() != wv.cols()) throw ShapeError("linear: bias must be (1 x out)");
  Tensor<T> out = Tensor<T>::matrix(xv.rows(), wv.cols());
  auto o = as_mat(out);
  o.noalias() = as_mat(xv) * as_mat(wv);
  o.rowwise() += as_mat(bv).row(0);
  const std::size_t ix = x.id, iw = w.id, ib = b.id;
  return x.tape->push(std::move(out), {ix, iw, ib}, [=](Tape<T>& tp, std::size_t self) {
    const auto g = as_mat(tp.grad(self));
    if (tp.requires_grad(ix)) as_mat(tp.grad(ix)).noalias() += g * as_mat(tp.value(iw)).transpose();
    if (tp.requires_grad(iw)) as_mat(tp.grad(iw)).noalias() += as_mat(tp.value(ix)).transpose() * g;
    if (tp.requires_grad(ib)) as_mat(tp.grad(ib)).row(0) += g.colwise().sum();
  });
}

// ---------------------------------------------------------------------------
// Elementwise nonlinearities

template <class T>
Var<T> silu(Var<T> a) {
  return unary(
      a, [](T x) { return x * stable_sigmoid(x); },
      [](T x, T) {
        const T s = stable_sigmoid(x);
        return s * (T(1) + x * (T(1) - s));
      });
}

template <class T>
Var<T> softplus(Var<T> a) {
  return unary(a, [](T x) { return stable_softplus(x); }, [](T x, T) { return stable_sigmoid(x); });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  return unary(a, [](T x) { return stable_sigmoid(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var<T> tanh(Var<T> a) {
  return unary(a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <class T>
Var<T> exp(Var<T> a) {
  return unary(a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Var<T> log(Var<T> a) {
  return unary(a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <class T>
Var<T> square(Var<T> a) {
  return unary(a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <class T>
Var<T> abs(Var<T> a) {
  return unary(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

// ---------------------------------------------------------------------------
// Reductions

template <class T>
Var<T> sum(Var<T> a) {
  const Tensor<T>& av = a.value();
  T s = 0;
  for (T v : av.values()) s += v;
  const std::size_t ia = a.id;
  return a.tape->push(Tensor<T>::scalar(s), {ia}, [=](Tape<T>& tp, std::size_t self) {
    const T g = tp.grad(self)[0];
    for (T& v : tp.grad(ia).values()) v += g;
  });
}

template <class T>
Var<T> mean(Var<T> a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

template <class T>
Var<T> row_sum(Var<T> a) {
  const Tensor<T>& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor<T> out = Tensor<T>::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    T s = 0;
    for (std::size_t j = 0; j < c; ++j) s += av(i, j);
    out[i] = s;
  }
  const std::size_t ia = a.id;
  return a.tape->push(std::move(out), {ia}, [=](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += g[i];
  });
}

template <class T>
Var<T> row_logsumexp(Var<T> a) {
  const Tensor<T>& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor<T> out = Tensor<T>::matrix(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    T m = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < c; ++j) m = std::max(m, av(i, j));
    T s = 0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(av(i, j) - m);
    out[i] = m + std::log(s);
  }
  const std::size_t ia = a.id;
  return a.tape->push(std::move(out), {ia}, [=](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& x = tp.value(ia);
    const Tensor<T>& y = tp.value(self);
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += g[i] * std::exp(x(i, j) - y[i]);
  });
}

// ---------------------------------------------------------------------------
// Structural

template <class T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  Tape<T>* tape = parts.front().tape;
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  std::vector<std::size_t> ids, offsets, widths;
  for (const Var<T>& p : parts) {
    if (p.tape != tape) throw ContractError("concat_cols: vars from different tapes");
    if (p.rows() != r) throw ShapeError("concat_cols: row counts differ");
    ids.push_back(p.id);
    offsets.push_back(c);
    widths.push_back(p.cols());
    c += p.cols();
  }
  Tensor<T> out = Tensor<T>::matrix(r, c);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor<T>& v = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(v.data() + i * widths[k], widths[k], out.data() + i * c + offsets[k]);
  }
  return tape->push(std::move(out), ids, [=](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Tensor<T>& gk = tp.grad(ids[k]);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < widths[k]; ++j) gk(i, j) += g(i, offsets[k] + j);
    }
  });
}

template <class T>
Var<T> slice_cols(Var<T> a, std::size_t begin, std::size_t count) {
  const Tensor<T>& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  if (count == 0 || begin + count > c) throw ShapeError("slice_cols: range out of bounds");
  Tensor<T> out = Tensor<T>::matrix(r, count);
  for (std::size_t i = 0; i < r; ++i) std::copy_n(av.data() + i * c + begin, count, out.data() + i * count);
  const std::size_t ia = a.id;
  return a.tape->push(std::move(out), {ia}, [=](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < count; ++j) ga(i, begin + j) += g(i, j);
  });
}

template <class T>
Var<T> transpose(Var<T> a) {
  const Tensor<T>& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor<T> out = Tensor<T>::matrix(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = av(i, j);
  const std::size_t ia = a.id;
  return a.tape->push(std::move(out), {ia}, [=](Tape<T>& tp, std::size_t self) {
    const Tensor<T>& g = tp.grad(self);
    Tensor<T>& ga = tp.grad(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga(i, j) += g(j, i);
  });
}

template <class T>
Var<T> mse(Var<T> a, Var<T> b) {
  same_tape(a, b, "mse");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  require_same_shape(av.as_matrix(), bv.as_matrix(), "mse");
  T s = 0;
  for (std::size_t k = 0; k < av.size(); ++k) {
    const T d = av[k] - bv[k];
    s += d * d;
  }
  const T n = static_cast<T>(av.size());
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->push(Tensor<T>::scalar(s / n), {ia, ib}, [=](Tape<T>& tp, std::size_t self) {
    const T g = tp.grad(self)[0] * T(2) / n;
    const Tensor<T>& x = tp.value(ia);
    const Tensor<T>& y = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor<T>& ga = tp.grad(ia);
      for (std::size_t k = 0; k < x.size(); ++k) ga[k] += g * (x[k] - y[k]);
    }
    if (tp.requires_grad(ib)) {
      Tensor<T>& gb = tp.grad(ib);
      for (std::size_t k = 0; k < x.size(); ++k) gb[k] -= g * (x[k] - y[k]);
    }
  });
}

#define DBAE_INSTANTIATE(T)                                                        \
  template class Tape<T>;                                                          \
  template Var<T> add(Var<T>, Var<T>);                                             \
  template Var<T> sub(Var<T>, Var<T>);                                             \
  template Var<T> mul(Var<T>, Var<T>);                                             \
  template Var<T> scale(Var<T>, double);                                           \
  template Var<T> add_scalar(Var<T>, double);                                      \
  template Var<T> matmul(Var<T>, Var<T>);                                          \
  template Var<T> linear(Var<T>, Var<T>, Var<T>);                                  \
  template Var<T> silu(Var<T>);                                                    \
  template Var<T> softplus(Var<T>);                                                \
  template Var<T> sigmoid(Var<T>);                                                 \
  template Var<T> tanh(Var<T>);                                                    \
  template Var<T> exp(Var<T>);                                                     \
  template Var<T> log(Var<T>);                                                     \
  template Var<T> square(Var<T>);                                                  \
  template Var<T> abs(Var<T>);                                                     \
  template Var<T> sum(Var<T>);                                                     \
  template Var<T> mean(Var<T>);                                                    \
  template Var<T> row_sum(Var<T>);                                                 \
  template Var<T> row_logsumexp(Var<T>);                                           \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                         \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                    \
  template Var<T> transpose(Var<T>);                                               \
  template Var<T> mse(Var<T>, Var<T>);

DBAE_INSTANTIATE(float)
DBAE_INSTANTIATE(double)

}  // namespace dbae::ad
