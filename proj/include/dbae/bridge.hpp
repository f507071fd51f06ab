// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "dbae/random.hpp"
#include "dbae/schedule.hpp"
#include "dbae/tensor.hpp"

namespace dbae {

/// Scalar statistics of the pinned bridge q(x_t | x_0, x_T) at one time.
struct BridgeCoefficients {
  double t = 0;
  double alpha_t = 1, sigma_t = 0;
  double alpha_end = 1, sigma_end = 0;
  double ratio = 0;            // R(t)
  double one_minus_ratio = 1;  // 1 - R(t), cancellation free
  double mean_end = 0;         // weight of x_T in the bridge mean
  double mean_start = 1;       // weight of x_0 in the bridge mean
  double sigma_hat = 0;
  double var_hat = 0;
};

/// Affine map from a score to an x0 estimate: x0 = a x_t + b x_T + c s, and
/// the weight making 1/2 g^2 |s - s_true|^2 = 1/2 w |x0_hat - x0|^2.
struct X0Coefficients {
  double alpha = 0;
  double beta = 0;
  double gamma = 0;
  double lambda = 0;
};

/// Closed-form Doob h-transform bridge on top of a VP schedule.
///
/// Scores, h and the x0 coefficients are only evaluated for t in the
/// admissible interval [eps_t T, (1 - eps_t) T]; outside it the bridge
/// variance vanishes and those calls raise SingularityError. bridge_stats and
/// sample_bridge accept the closed interval [0, T].
class BridgeKernel {
 public:
  explicit BridgeKernel(VpSchedule schedule, double eps_t = 1e-4);

  const VpSchedule& schedule() const { return schedule_; }
  double eps_t() const { return eps_t_; }
  double t_min() const { return eps_t_ * schedule_.t_end(); }
  double t_max() const { return (1.0 - eps_t_) * schedule_.t_end(); }
  void check_admissible(double t, const char* where) const;

  BridgeCoefficients coefficients(double t) const;
  X0Coefficients x0_coeffs(double t) const;

  /// h = grad_{x_t} log N(y; a x_t, v I) with a = alpha_T / alpha_t and
  /// v = sigma_T^2 - a^2 sigma_t^2.
  template <class T>
  Tensor<T> h_transform(const Tensor<T>& x_t, double t, const Tensor<T>& y) const {
    require_same_shape(x_t, y, "h_transform");
    const auto [a, v] = h_terms(t);
    Tensor<T> out(x_t.shape());
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      out[i] = static_cast<T>((a / v) * (static_cast<double>(y[i]) - a * static_cast<double>(x_t[i])));
    }
    return out;
  }

  /// (a, v) of the h-transform Gaussian at time t.
  std::pair<double, double> h_terms(double t) const;

  /// Mean and standard deviation of q(x_t | x_0, x_T).
  template <class T>
  std::pair<Tensor<T>, double> bridge_stats(const Tensor<T>& x0, const Tensor<T>& x_end,
                                            double t) const {
    require_same_shape(x0, x_end, "bridge_stats");
    const BridgeCoefficients c = coefficients(t);
    return {axpby(c.mean_start, x0, c.mean_end, x_end), c.sigma_hat};
  }

  template <class T>
  Tensor<T> sample_bridge(const Tensor<T>& x0, const Tensor<T>& x_end, double t,
                          RandomStream& rng) const {
    auto [mean, sd] = bridge_stats(x0, x_end, t);
    for (std::size_t i = 0; i < mean.size(); ++i) {
      mean[i] = static_cast<T>(static_cast<double>(mean[i]) + sd * rng.normal());
    }
    return mean;
  }

  /// grad_{x_t} log q(x_t | x_0, x_T) = (mu_hat - x_t) / sigma_hat^2.
  template <class T>
  Tensor<T> bridge_score(const Tensor<T>& x_t, const Tensor<T>& x0, const Tensor<T>& x_end,
                         double t) const {
    require_same_shape(x_t, x0, "bridge_score");
    check_admissible(t, "bridge_score");
    const BridgeCoefficients c = coefficients(t);
    return score_from_mean(x_t, axpby(c.mean_start, x0, c.mean_end, x_end), c.var_hat);
  }

  template <class T>
  Tensor<T> x0_from_score(const Tensor<T>& x_t, double t, const Tensor<T>& x_end,
                          const Tensor<T>& score) const {
    require_same_shape(x_t, x_end, "x0_from_score");
    require_same_shape(x_t, score, "x0_from_score");
    const X0Coefficients k = x0_coeffs(t);
    Tensor<T> out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<T>(k.alpha * static_cast<double>(x_t[i]) +
                              k.beta * static_cast<double>(x_end[i]) +
                              k.gamma * static_cast<double>(score[i]));
    }
    return out;
  }

  template <class T>
  Tensor<T> score_from_x0(const Tensor<T>& x_t, double t, const Tensor<T>& x_end,
                          const Tensor<T>& x0_hat) const {
    require_same_shape(x_t, x_end, "score_from_x0");
    require_same_shape(x_t, x0_hat, "score_from_x0");
    check_admissible(t, "score_from_x0");
    const BridgeCoefficients c = coefficients(t);
    return score_from_mean(x_t, axpby(c.mean_start, x0_hat, c.mean_end, x_end), c.var_hat);
  }

 private:
  template <class T>
  static Tensor<T> score_from_mean(const Tensor<T>& x_t, const Tensor<T>& mean, double var) {
    Tensor<T> out(x_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<T>((static_cast<double>(mean[i]) - static_cast<double>(x_t[i])) / var);
    }
    return out;
  }

  VpSchedule schedule_;
  double eps_t_;
};

}  // namespace dbae
