// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "dbae/errors.hpp"
#include "dbae/schedule.hpp"
#include "test_util.hpp"

namespace dbae {
namespace {

const VpSchedule kLinear = VpSchedule::linear(0.1, 20.0, 1.0);

TEST(Schedule, BetaEndpoints) {
  EXPECT_DOUBLE_EQ(kLinear.beta(0.0), 0.1);
  EXPECT_DOUBLE_EQ(kLinear.beta(1.0), 20.0);
  const VpSchedule c = VpSchedule::constant(0.008, 1000.0);
  for (double t : {0.0, 1.0, 333.3, 1000.0}) EXPECT_DOUBLE_EQ(c.beta(t), 0.008);
}

TEST(Schedule, OutsideDomainThrows) {
  EXPECT_THROW(kLinear.beta(-1e-9), DomainError);
  EXPECT_THROW(kLinear.beta(1.0 + 1e-9), DomainError);
  EXPECT_THROW(kLinear.alpha_sigma(2.0), DomainError);
  Tensor<double> x = Tensor<double>::matrix(1, 2);
  EXPECT_THROW(kLinear.drift_vol(x, -0.5), DomainError);
}

TEST(Schedule, DriftVolLinearInX) {
  RandomStream rng(1);
  const Tensor<double> zero = Tensor<double>::matrix(3, 2);
  EXPECT_EQ(squared_norm(kLinear.drift_vol(zero, 0.3).first), 0.0);

  // beta(t) = 4 on the linear schedule at t = (4 - 0.1) / 19.9.
  const double t4 = (4.0 - 0.1) / 19.9;
  EXPECT_NEAR(kLinear.drift_vol(zero, t4).second, 2.0, 1e-12);

  const Tensor<double> x = testing::normals(4, 3, rng);
  const auto f1 = kLinear.drift_vol(x, 0.42).first;
  const auto f2 = kLinear.drift_vol(scaled(x, 2.0), 0.42).first;
  EXPECT_LT(max_abs_diff(f2, scaled(f1, 2.0)), 1e-15);
}

TEST(Schedule, AlphaSigmaAtZeroIsExact) {
  const auto [a, s] = kLinear.alpha_sigma(0.0);
  EXPECT_EQ(a, 1.0);
  EXPECT_EQ(s, 0.0);
}

TEST(Schedule, TerminalAlphaMatchesQuadrature) {
  // Frozen from composite Simpson on beta with 10^5 panels: B(1) = 10.05.
  constexpr double kAlphaOne = 6.5715864949e-3;
  double b = 0;
  const int n = 100000;
  for (int i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / n;
    const double w = (i == 0 || i == n) ? 1 : (i % 2 ? 4 : 2);
    b += w * (0.1 + 19.9 * t);
  }
  b /= 3.0 * n;
  EXPECT_NEAR(std::exp(-0.5 * b), kAlphaOne, 1e-12);
  EXPECT_NEAR(kLinear.alpha_sigma(1.0).first, kAlphaOne, 1e-12);
  EXPECT_NEAR(kLinear.integral_beta(1.0), kLinear.integral_beta_quadrature(1.0), 1e-10);
}

TEST(Schedule, VariancePreservingOnGrid) {
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    const auto [a, s] = kLinear.alpha_sigma(t);
    EXPECT_LT(std::abs(a * a + s * s - 1.0), 1e-12) << t;
  }
  RandomStream rng(3);
  const VpSchedule c = VpSchedule::constant(0.008, 1000.0);
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(0.0, 1000.0);
    const auto [a, s] = c.alpha_sigma(t);
    EXPECT_LT(std::abs(a * a + s * s - 1.0), 1e-12);
  }
}

TEST(Schedule, MonotoneAlphaSigmaAndRatio) {
  double pa = 2, ps = -1, pr = -1;
  for (int i = 1; i <= 1000; ++i) {
    const double t = i / 1000.0;
    const auto [a, s] = kLinear.alpha_sigma(t);
    const double r = kLinear.snr_ratio(t);
    EXPECT_LT(a, pa);
    EXPECT_GT(s, ps);
    EXPECT_GT(r, pr);
    pa = a, ps = s, pr = r;
  }
}

TEST(Schedule, SnrRatioValues) {
  EXPECT_DOUBLE_EQ(kLinear.snr_ratio(1.0), 1.0);
  EXPECT_EQ(kLinear.snr_ratio(0.0), 0.0);
  EXPECT_LT(kLinear.snr_ratio(1e-9), 1e-6);
  // Oracle: compose alpha_sigma at t and T.
  const auto [at, st] = kLinear.alpha_sigma(0.5);
  const auto [aT, sT] = kLinear.alpha_sigma(1.0);
  const double oracle = (aT * aT / (sT * sT)) / (at * at / (st * st));
  EXPECT_LT(testing::rel_err(kLinear.snr_ratio(0.5), oracle), 1e-13);
  EXPECT_NEAR(oracle, 5.0304982128e-4, 1e-13);  // frozen
  EXPECT_LT(testing::rel_err(kLinear.one_minus_snr_ratio(0.5), 1.0 - oracle), 1e-13);
}

TEST(Schedule, OneMinusRatioWithoutCancellation) {
  const double t = 1.0 - 1e-9;
  const double omr = kLinear.one_minus_snr_ratio(t);
  EXPECT_GT(omr, 0.0);
  // d/dt log R = -d/dt log SNR(t) = beta / sigma^2 at t ~ T, so 1 - R ~ beta/sigma^2 * dt.
  const double slope = kLinear.beta(1.0) / kLinear.sigma_sq(1.0);
  EXPECT_LT(testing::rel_err(omr, slope * 1e-9), 1e-6);
}

TEST(Schedule, AlphaDerivativeMatchesDrift) {
  for (double t : {0.05, 0.2, 0.5, 0.8, 0.95}) {
    const double h = 1e-6;
    const double d = (kLinear.alpha_sigma(t + h).first - kLinear.alpha_sigma(t - h).first) / (2 * h);
    const double expected = -0.5 * kLinear.beta(t) * kLinear.alpha_sigma(t).first;
    EXPECT_LT(testing::rel_err(d, expected), 1e-6) << t;
  }
}

TEST(Schedule, ClosedFormMatchesQuadrature) {
  const VpSchedule c = VpSchedule::constant(0.008, 1000.0);
  for (double f : {0.1, 0.37, 0.9, 1.0}) {
    EXPECT_LT(testing::rel_err(kLinear.integral_beta(f), kLinear.integral_beta_quadrature(f)), 1e-12);
    EXPECT_LT(testing::rel_err(c.integral_beta(1000 * f), c.integral_beta_quadrature(1000 * f)), 1e-12);
  }
}

}  // namespace
}  // namespace dbae
