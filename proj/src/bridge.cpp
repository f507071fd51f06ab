// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/bridge.hpp"

#include <cmath>
#include <string>
#include <tuple>

namespace dbae {

BridgeKernel::BridgeKernel(VpSchedule schedule, double eps_t)
    : schedule_(std::move(schedule)), eps_t_(eps_t) {
  if (!(eps_t > 0.0 && eps_t < 0.5)) throw DomainError("BridgeKernel: eps_t must be in (0, 0.5)");
}

void BridgeKernel::check_admissible(double t, const char* where) const {
  // Relative slack so grid endpoints computed as (1 - eps) * T pass.
  const double slack = 1e-12 * schedule_.t_end();
  if (t < t_min() - slack || t > t_max() + slack) {
    throw SingularityError(std::string(where) + ": t = " + std::to_string(t) +
                           " outside admissible interval [" + std::to_string(t_min()) + ", " +
                           std::to_string(t_max()) + "]");
  }
}

BridgeCoefficients BridgeKernel::coefficients(double t) const {
  schedule_.check_time(t);
  BridgeCoefficients c;
  c.t = t;
  std::tie(c.alpha_t, c.sigma_t) = schedule_.alpha_sigma(t);
  std::tie(c.alpha_end, c.sigma_end) = schedule_.alpha_sigma(schedule_.t_end());
  c.ratio = schedule_.snr_ratio(t);
  c.one_minus_ratio = t == 0.0 ? 1.0 : schedule_.one_minus_snr_ratio(t);
  c.mean_end = c.ratio * c.alpha_t / c.alpha_end;
  c.mean_start = c.alpha_t * c.one_minus_ratio;
  c.var_hat = c.sigma_t * c.sigma_t * c.one_minus_ratio;
  c.sigma_hat = std::sqrt(c.var_hat);
  return c;
}

X0Coefficients BridgeKernel::x0_coeffs(double t) const {
  check_admissible(t, "x0_coeffs");
  const BridgeCoefficients c = coefficients(t);
  const double sigma_sq = c.sigma_t * c.sigma_t;
  X0Coefficients k;
  k.alpha = 1.0 / (c.alpha_t * c.one_minus_ratio);
  k.beta = -c.ratio / (c.alpha_end * c.one_minus_ratio);
  k.gamma = sigma_sq / c.alpha_t;
  k.lambda = schedule_.beta(t) / (k.gamma * k.gamma);
  return k;
}

std::pair<double, double> BridgeKernel::h_terms(double t) const {
  // h stays finite down to t = 0; only the pinned end is singular.
  schedule_.check_time(t);
  if (t > t_max() + 1e-12 * schedule_.t_end()) {
    throw SingularityError("h_transform: t = " + std::to_string(t) + " beyond " +
                           std::to_string(t_max()));
  }
  const double rest = schedule_.integral_beta_to_end(t);
  // a = alpha_T / alpha_t; v = sigma_T^2 - a^2 sigma_t^2 = 1 - exp(-(B_T - B_t)).
  return {std::exp(-0.5 * rest), -std::expm1(-rest)};
}

}  // namespace dbae
