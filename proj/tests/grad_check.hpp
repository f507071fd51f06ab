// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dbae/autodiff.hpp"
#include "test_util.hpp"

namespace dbae::testing {

/// An op under test: builds its output from leaf vars on a tape.
struct OpCase {
  std::string name;
  std::vector<Shape> inputs;
  /// Inputs are drawn as N(0,1) + shift (log needs positive arguments).
  double shift = 0.0;
  std::function<ad::Var<float>(ad::Tape<float>&, const std::vector<ad::Var<float>>&)> f32;
  std::function<ad::Var<double>(ad::Tape<double>&, const std::vector<ad::Var<double>>&)> f64;
};

#define DBAE_OP_CASE(NAME, SHAPES, SHIFT, EXPR)                                                   \
  ::dbae::testing::OpCase {                                                                     \
    NAME, SHAPES, SHIFT,                                                                        \
        [](ad::Tape<float>& tape, const std::vector<ad::Var<float>>& x) { (void)tape; return EXPR; }, \
        [](ad::Tape<double>& tape, const std::vector<ad::Var<double>>& x) { (void)tape; return EXPR; } \
  }

/// Scalar loss sum(out * weights) of one op case, gradients w.r.t. each input.
template <class T>
std::pair<double, std::vector<Tensor<T>>> eval_case(const OpCase& c, const std::vector<Tensor<T>>& inputs,
                                                    const Tensor<T>* weights, Tensor<T>* weights_out) {
  ad::Tape<T> tape;
  std::vector<ad::Var<T>> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(tape.param("in" + std::to_string(i), inputs[i]));
  ad::Var<T> out;
  if constexpr (std::is_same_v<T, float>) out = c.f32(tape, vars);
  else out = c.f64(tape, vars);
  Tensor<T> w(out.value().shape());
  if (weights) w = *weights;
  if (weights_out) *weights_out = w;
  const ad::Var<T> loss = ad::sum(ad::mul(out, tape.constant(w)));
  const ad::Gradients<T> g = tape.backward(loss);
  std::vector<Tensor<T>> grads;
  for (std::size_t i = 0; i < inputs.size(); ++i) grads.push_back(g.at("in" + std::to_string(i)));
  return {static_cast<double>(loss.value()[0]), grads};
}

struct CheckResult {
  double worst_f32 = 0;
  double worst_f64 = 0;
};

/// Random instances of one op: autodiff in both precisions against central
/// differences of the double-precision forward pass.
inline CheckResult check_op(const OpCase& c, RandomStream& rng, int instances) {
  CheckResult r;
  for (int rep = 0; rep < instances; ++rep) {
    std::vector<Tensor<double>> x;
    for (const Shape& s : c.inputs) {
      Tensor<double> t(s);
      for (double& v : t.values()) v = static_cast<double>(static_cast<float>(rng.normal() + c.shift));
      x.push_back(t);
    }
    // Probe the output shape once to draw weights.
    Tensor<double> w;
    eval_case<double>(c, x, nullptr, &w);
    for (double& v : w.values()) v = static_cast<double>(static_cast<float>(rng.normal()));

    const auto [l64, g64] = eval_case<double>(c, x, &w, nullptr);
    std::vector<Tensor<float>> xf;
    for (const auto& t : x) xf.push_back(t.cast<float>());
    const Tensor<float> wf = w.cast<float>();
    const auto [l32, g32] = eval_case<float>(c, xf, &wf, nullptr);
    (void)l64, (void)l32;

    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto fd = fd_gradient(
          [&](const Tensor<double>& xi) {
            std::vector<Tensor<double>> y = x;
            y[i] = xi;
            return eval_case<double>(c, y, &w, nullptr).first;
          },
          x[i], 1e-5);
      r.worst_f64 = std::max(r.worst_f64, max_rel_diff(g64[i], fd, 1e-3));
      r.worst_f32 = std::max(r.worst_f32, max_rel_diff(g32[i], fd, 1e-3));
    }
  }
  return r;
}

/// The primitive set of the tape engine.
inline std::vector<OpCase> primitive_cases() {
  using S = std::vector<Shape>;
  return {
      DBAE_OP_CASE("add", (S{{3, 4}, {3, 4}}), 0, ad::add(x[0], x[1])),
      DBAE_OP_CASE("add_broadcast", (S{{3, 4}, {1, 4}}), 0, ad::add(x[0], x[1])),
      DBAE_OP_CASE("sub_broadcast", (S{{3, 1}, {3, 4}}), 0, ad::sub(x[0], x[1])),
      DBAE_OP_CASE("mul", (S{{3, 4}, {3, 4}}), 0, ad::mul(x[0], x[1])),
      DBAE_OP_CASE("mul_broadcast", (S{{3, 4}, {3, 1}}), 0, ad::mul(x[0], x[1])),
      DBAE_OP_CASE("scale", (S{{2, 5}}), 0, ad::scale(x[0], -1.7)),
      DBAE_OP_CASE("add_scalar", (S{{2, 5}}), 0, ad::add_scalar(x[0], 0.3)),
      DBAE_OP_CASE("matmul", (S{{3, 4}, {4, 2}}), 0, ad::matmul(x[0], x[1])),
      DBAE_OP_CASE("linear", (S{{3, 4}, {4, 2}, {1, 2}}), 0, ad::linear(x[0], x[1], x[2])),
      DBAE_OP_CASE("silu", (S{{3, 4}}), 0, ad::silu(x[0])),
      DBAE_OP_CASE("softplus", (S{{3, 4}}), 0, ad::softplus(x[0])),
      DBAE_OP_CASE("sigmoid", (S{{3, 4}}), 0, ad::sigmoid(x[0])),
      DBAE_OP_CASE("tanh", (S{{3, 4}}), 0, ad::tanh(x[0])),
      DBAE_OP_CASE("exp", (S{{3, 4}}), 0, ad::exp(x[0])),
      DBAE_OP_CASE("log", (S{{3, 4}}), 4.0, ad::log(x[0])),
      DBAE_OP_CASE("square", (S{{3, 4}}), 0, ad::square(x[0])),
      DBAE_OP_CASE("abs", (S{{3, 4}}), 0, ad::abs(x[0])),
      DBAE_OP_CASE("sum", (S{{3, 4}}), 0, ad::sum(x[0])),
      DBAE_OP_CASE("mean", (S{{3, 4}}), 0, ad::mean(x[0])),
      DBAE_OP_CASE("row_sum", (S{{3, 4}}), 0, ad::row_sum(x[0])),
      DBAE_OP_CASE("row_logsumexp", (S{{3, 4}}), 0, ad::row_logsumexp(x[0])),
      DBAE_OP_CASE("concat_cols", (S{{3, 2}, {3, 3}}), 0, ad::concat_cols(std::vector{x[0], x[1]})),
      DBAE_OP_CASE("slice_cols", (S{{3, 5}}), 0, ad::slice_cols(x[0], 1, 3)),
      DBAE_OP_CASE("transpose", (S{{3, 5}}), 0, ad::transpose(x[0])),
      DBAE_OP_CASE("mse", (S{{3, 4}, {3, 4}}), 0, ad::mse(x[0], x[1])),
  };
}

}  // namespace dbae::testing
