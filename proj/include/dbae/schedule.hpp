// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>

#include "dbae/tensor.hpp"

namespace dbae {

enum class BetaKind { linear, constant };

/// Placement of sampler time nodes: evenly spaced, or u^2 spacing that
/// concentrates nodes near t = 0.
enum class GridSpacing { uniform, quadratic };
std::string to_string(GridSpacing spacing);
GridSpacing grid_spacing_from_string(const std::string& s);

/// Variance-preserving forward diffusion dx = -1/2 beta(t) x dt + sqrt(beta(t)) dw
/// on t in [0, T].
///
/// beta is linear from beta_min (t = 0) to beta_max (t = T), or constant.
/// alpha_t = exp(-1/2 B(t)) with B the closed-form primitive of beta, and
/// sigma_t^2 = 1 - alpha_t^2. Immutable; every member is a pure function.
class VpSchedule {
 public:
  static VpSchedule linear(double beta_min, double beta_max, double t_end = 1.0,
                           int quadrature_steps = 4096);
  static VpSchedule constant(double beta, double t_end = 1.0, int quadrature_steps = 4096);

  BetaKind kind() const { return kind_; }
  double beta_min() const { return beta_min_; }
  double beta_max() const { return beta_max_; }
  double t_end() const { return t_end_; }
  int quadrature_steps() const { return quadrature_steps_; }

  double beta(double t) const;
  /// g(t) = sqrt(beta(t)).
  double g(double t) const;

  /// Returns (f(x, t), g(t)) with f = -1/2 beta(t) x.
  template <class T>
  std::pair<Tensor<T>, double> drift_vol(const Tensor<T>& x, double t) const {
    return {scaled(x, -0.5 * beta(t)), g(t)};
  }

  /// B(t) = int_0^t beta(s) ds, closed form.
  double integral_beta(double t) const;
  /// Same integral by composite Simpson with quadrature_steps panels. Used
  /// only to cross-check the closed form.
  double integral_beta_quadrature(double t) const;
  /// B(t_end) - B(t), computed without cancellation.
  double integral_beta_to_end(double t) const;

  /// (alpha_t, sigma_t); alpha_0 = 1 and sigma_0 = 0 exactly.
  std::pair<double, double> alpha_sigma(double t) const;
  double sigma_sq(double t) const;
  /// alpha_t^2 / sigma_t^2; +inf at t = 0.
  double snr(double t) const;
  /// R(t) = SNR(T) / SNR(t) in [0, 1]; R(0) = 0 by continuity, R(T) = 1.
  double snr_ratio(double t) const;
  /// 1 - R(t) evaluated without cancellation near t = T.
  double one_minus_snr_ratio(double t) const;

  void check_time(double t) const;

  friend bool operator==(const VpSchedule&, const VpSchedule&) = default;

 private:
  VpSchedule(BetaKind kind, double beta_min, double beta_max, double t_end, int quadrature_steps);

  BetaKind kind_;
  double beta_min_;
  double beta_max_;
  double t_end_;
  int quadrature_steps_;
};

}  // namespace dbae
