// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/schedule.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace dbae {

VpSchedule::VpSchedule(BetaKind kind, double beta_min, double beta_max, double t_end,
                       int quadrature_steps)
    : kind_(kind),
      beta_min_(beta_min),
      beta_max_(beta_max),
      t_end_(t_end),
      quadrature_steps_(quadrature_steps) {
  if (!(t_end > 0)) throw DomainError("VpSchedule: t_end must be positive");
  if (!(beta_min > 0) || !(beta_max > 0))
    throw DomainError("VpSchedule: beta must be positive on [0, T]");
  if (quadrature_steps <= 0) throw DomainError("VpSchedule: quadrature_steps must be positive");
}

VpSchedule VpSchedule::linear(double beta_min, double beta_max, double t_end,
                              int quadrature_steps) {
  return VpSchedule(BetaKind::linear, beta_min, beta_max, t_end, quadrature_steps);
}

VpSchedule VpSchedule::constant(double beta, double t_end, int quadrature_steps) {
  return VpSchedule(BetaKind::constant, beta, beta, t_end, quadrature_steps);
}

void VpSchedule::check_time(double t) const {
  if (!(t >= 0.0 && t <= t_end_)) {
    throw DomainError("VpSchedule: t = " + std::to_string(t) + " outside [0, " +
                      std::to_string(t_end_) + "]");
  }
}

double VpSchedule::beta(double t) const {
  check_time(t);
  if (kind_ == BetaKind::constant) return beta_min_;
  return beta_min_ + (t / t_end_) * (beta_max_ - beta_min_);
}

double VpSchedule::g(double t) const { return std::sqrt(beta(t)); }

double VpSchedule::integral_beta(double t) const {
  check_time(t);
  if (kind_ == BetaKind::constant) return beta_min_ * t;
  return beta_min_ * t + 0.5 * (beta_max_ - beta_min_) * t * t / t_end_;
}

double VpSchedule::integral_beta_to_end(double t) const {
  check_time(t);
  const double dt = t_end_ - t;
  if (kind_ == BetaKind::constant) return beta_min_ * dt;
  // Trapezoid of the linear beta over [t, T] is exact.
  return 0.5 * (beta(t) + beta_max_) * dt;
}

double VpSchedule::integral_beta_quadrature(double t) const {
  check_time(t);
  const int n = 2 * quadrature_steps_;
  const double h = t / n;
  double sum = beta(0.0) + beta(t);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * beta(i * h);
  return sum * h / 3.0;
}

std::pair<double, double> VpSchedule::alpha_sigma(double t) const {
  const double b = integral_beta(t);
  return {std::exp(-0.5 * b), std::sqrt(-std::expm1(-b))};
}

double VpSchedule::sigma_sq(double t) const { return -std::expm1(-integral_beta(t)); }

double VpSchedule::snr(double t) const {
  const double s2 = sigma_sq(t);
  if (s2 == 0.0) return std::numeric_limits<double>::infinity();
  return std::exp(-integral_beta(t)) / s2;
}

double VpSchedule::snr_ratio(double t) const {
  check_time(t);
  if (t == 0.0) return 0.0;
  return 1.0 - one_minus_snr_ratio(t);
}

double VpSchedule::one_minus_snr_ratio(double t) const {
  // 1 - R = (alpha_t^2 sigma_T^2 - alpha_T^2 sigma_t^2) / (alpha_t^2 sigma_T^2)
  //       = (1 - exp(-(B_T - B_t))) / sigma_T^2 for the VP parameterization.
  return -std::expm1(-integral_beta_to_end(t)) / sigma_sq(t_end_);
}

std::string to_string(GridSpacing spacing) {
  return spacing == GridSpacing::uniform ? "uniform" : "quadratic";
}

GridSpacing grid_spacing_from_string(const std::string& s) {
  if (s == "uniform") return GridSpacing::uniform;
  if (s == "quadratic") return GridSpacing::quadratic;
  throw ConfigError("unknown grid spacing '" + s + "'");
}

}  // namespace dbae
