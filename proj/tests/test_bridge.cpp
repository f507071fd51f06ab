// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "dbae/bridge.hpp"
#include "dbae/errors.hpp"
#include "test_util.hpp"

namespace dbae {
namespace {

using testing::normals;
using testing::rel_err;

const BridgeKernel kKernel(VpSchedule::linear(0.1, 20.0, 1.0));

double log_normal(const Tensor<double>& y, const Tensor<double>& mean, double var) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - mean[i]) * (y[i] - mean[i]);
  return -0.5 * s / var - 0.5 * static_cast<double>(y.size()) * std::log(2 * M_PI * var);
}

TEST(Bridge, HTransformWorkedExample) {
  // Constant beta with alpha_T = 0.5 at T = 1; alpha_t = 0.9 at t = -2 ln 0.9 / beta.
  const double beta = 2 * std::log(2.0);
  const BridgeKernel k(VpSchedule::constant(beta, 1.0));
  const double t = -2 * std::log(0.9) / beta;
  const auto [a, v] = k.h_terms(t);
  EXPECT_NEAR(a, 5.0 / 9.0, 1e-12);
  EXPECT_NEAR(v, 0.75 - (25.0 / 81.0) * 0.19, 1e-12);
  EXPECT_NEAR(v, 56.0 / 81.0, 1e-12);
  const Tensor<double> x = Tensor<double>::matrix(1, 1, 1.0), y = Tensor<double>::matrix(1, 1, 0.0);
  const double h = k.h_transform(x, t, y)[0];
  EXPECT_NEAR(h, -25.0 / 56.0, 1e-12);  // -a^2 / v
  // Cross-check with central differences of log N(y; a x, v).
  const auto fd = testing::fd_gradient(
      [&](const Tensor<double>& xx) { return log_normal(y, scaled(xx, a), v); }, x);
  EXPECT_LT(rel_err(h, fd[0]), 1e-7);
}

TEST(Bridge, HTransformVanishesAtMeanAndMatchesFd) {
  RandomStream rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const double t = rng.uniform(kKernel.t_min(), 0.95);
    const auto [a, v] = kKernel.h_terms(t);
    const Tensor<double> x = normals(1, 3, rng);
    EXPECT_LT(squared_norm(kKernel.h_transform(x, t, scaled(x, a))), 1e-24);
    const Tensor<double> y = normals(1, 3, rng);
    const auto fd = testing::fd_gradient(
        [&](const Tensor<double>& xx) { return log_normal(y, scaled(xx, a), v); }, x, 1e-5);
    EXPECT_LT(testing::max_rel_diff(kKernel.h_transform(x, t, y), fd), 1e-5);
  }
}

TEST(Bridge, HTransformSingularNearEnd) {
  const Tensor<double> x = Tensor<double>::matrix(1, 2);
  EXPECT_THROW(kKernel.h_transform(x, 1.0, x), SingularityError);
  EXPECT_THROW(kKernel.h_transform(x, 1.0 - 1e-6, x), SingularityError);
  EXPECT_NO_THROW(kKernel.h_transform(x, 0.0, x));
}

TEST(Bridge, StatsPinnedAtEndpoints) {
  RandomStream rng(2);
  const Tensor<double> x0 = normals(2, 3, rng), xe = normals(2, 3, rng);
  auto [m1, s1] = kKernel.bridge_stats(x0, xe, 1.0);
  EXPECT_EQ(s1, 0.0);
  EXPECT_LT(max_abs_diff(m1, xe), 1e-15);
  auto [m0, s0] = kKernel.bridge_stats(x0, xe, 0.0);
  EXPECT_EQ(s0, 0.0);
  EXPECT_EQ(max_abs_diff(m0, x0), 0.0);
  EXPECT_LT(max_abs_diff(kKernel.sample_bridge(x0, xe, 1.0, rng), xe), 1e-15);
  EXPECT_EQ(max_abs_diff(kKernel.sample_bridge(x0, xe, 0.0, rng), x0), 0.0);
}

TEST(Bridge, StatsContinuousAtEndpoints) {
  const Tensor<double> x0 = Tensor<double>::matrix(1, 1, 1.0), xe = Tensor<double>::matrix(1, 1, -2.0);
  double prev = 1e9;
  for (double dt : {1e-2, 1e-3, 1e-4, 1e-6}) {
    const auto [m0, s0] = kKernel.bridge_stats(x0, xe, dt);
    const auto [m1, s1] = kKernel.bridge_stats(x0, xe, 1.0 - dt);
    const double gap = std::abs(m0[0] - 1.0) + s0 + std::abs(m1[0] + 2.0) + s1;
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-2);
}

TEST(Bridge, SampleCovarianceMatches) {
  RandomStream rng(5);
  const Tensor<double> x0 = Tensor<double>::matrix(1, 2, 0.3), xe = Tensor<double>::matrix(1, 2, -0.7);
  const double t = 0.4;
  const auto [mean, sd] = kKernel.bridge_stats(x0, xe, t);
  const int n = 100000;
  double c00 = 0, c11 = 0, c01 = 0;
  for (int i = 0; i < n; ++i) {
    const Tensor<double> s = kKernel.sample_bridge(x0, xe, t, rng);
    const double d0 = s[0] - mean[0], d1 = s[1] - mean[1];
    c00 += d0 * d0, c11 += d1 * d1, c01 += d0 * d1;
  }
  const double var = sd * sd;
  EXPECT_LT(rel_err(c00 / n, var), 0.02);
  EXPECT_LT(rel_err(c11 / n, var), 0.02);
  EXPECT_LT(std::abs(c01 / n) / var, 0.02);
}

TEST(Bridge, ScoreZeroAtMeanAndMatchesFd) {
  RandomStream rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const double t = rng.uniform(0.01, 0.99);
    const Tensor<double> x0 = normals(1, 3, rng), xe = normals(1, 3, rng), xt = normals(1, 3, rng);
    const auto [mean, sd] = kKernel.bridge_stats(x0, xe, t);
    EXPECT_LT(std::sqrt(squared_norm(kKernel.bridge_score(mean, x0, xe, t))), 1e-9);
    const auto fd = testing::fd_gradient(
        [&](const Tensor<double>& x) { return log_normal(x, mean, sd * sd); }, xt, 1e-6 * sd);
    EXPECT_LT(testing::max_rel_diff(kKernel.bridge_score(xt, x0, xe, t), fd), 1e-5);
  }
  const Tensor<double> zero = Tensor<double>::matrix(1, 1), xt = Tensor<double>::matrix(1, 1, 0.8);
  const double t = 0.3;
  const double var = kKernel.coefficients(t).var_hat;
  EXPECT_LT(rel_err(kKernel.bridge_score(xt, zero, zero, t)[0], -0.8 / var), 1e-14);
}

TEST(Bridge, ScoreSingularOutsideInterval) {
  const Tensor<double> x = Tensor<double>::matrix(1, 1);
  EXPECT_THROW(kKernel.bridge_score(x, x, x, 0.0), SingularityError);
  EXPECT_THROW(kKernel.bridge_score(x, x, x, 1.0), SingularityError);
  EXPECT_THROW(kKernel.x0_coeffs(1.0), SingularityError);
}

TEST(Bridge, X0CoefficientsFromPrimitives) {
  const double t = 0.5;
  const X0Coefficients k = kKernel.x0_coeffs(t);
  // Independent re-derivation from alpha_sigma and snr_ratio.
  const VpSchedule& s = kKernel.schedule();
  const auto [at, st] = s.alpha_sigma(t);
  const double aT = s.alpha_sigma(1.0).first;
  const double r = s.snr_ratio(t), g2 = s.beta(t);
  EXPECT_LT(rel_err(k.alpha, 1.0 / (at * (1 - r))), 1e-12);
  EXPECT_LT(rel_err(k.beta, -r / (aT * (1 - r))), 1e-12);
  EXPECT_LT(rel_err(k.gamma, st * st / at), 1e-12);
  EXPECT_LT(rel_err(k.lambda, g2 * at * at / std::pow(st, 4)), 1e-12);
  // Frozen values of the same oracle (mpmath, 30 digits).
  EXPECT_NEAR(k.alpha, 3.5581942263795, 1e-11);
  EXPECT_NEAR(k.gamma, 3.2752213966131, 1e-11);
}

TEST(Bridge, LambdaGammaIdentity) {
  RandomStream rng(9);
  for (int i = 0; i < 100; ++i) {
    const double t = rng.uniform(kKernel.t_min(), kKernel.t_max());
    const X0Coefficients k = kKernel.x0_coeffs(t);
    EXPECT_LT(rel_err(k.lambda * k.gamma * k.gamma, kKernel.schedule().beta(t)), 1e-12);
  }
}

TEST(Bridge, InversionIdentities) {
  RandomStream rng(13);
  for (int i = 0; i < 1000; ++i) {
    const double t = rng.uniform(kKernel.t_min(), kKernel.t_max());
    const Tensor<double> x0 = normals(1, 4, rng), xe = normals(1, 4, rng), xt = normals(1, 4, rng);
    const Tensor<double> s = kKernel.bridge_score(xt, x0, xe, t);
    const Tensor<double> back = kKernel.x0_from_score(xt, t, xe, s);
    EXPECT_LT(testing::max_rel_diff(back, x0), 1e-8);
    const Tensor<double> s2 = kKernel.score_from_x0(xt, t, xe, kKernel.x0_from_score(xt, t, xe, s));
    EXPECT_LT(testing::max_rel_diff(s2, s), 1e-10);
  }
}

TEST(Bridge, X0FromScoreLinearity) {
  RandomStream rng(17);
  const double t = 0.37;
  const X0Coefficients k = kKernel.x0_coeffs(t);
  const Tensor<double> xt = normals(1, 3, rng), xe = normals(1, 3, rng), s = normals(1, 3, rng),
                       delta = normals(1, 3, rng);
  const auto base = kKernel.x0_from_score(xt, t, xe, s);
  const auto moved = kKernel.x0_from_score(xt, t, xe, axpby(1.0, s, 1.0, delta));
  EXPECT_LT(max_abs_diff(axpby(1.0, moved, -1.0, base), scaled(delta, k.gamma)), 1e-12);

  // Zero data point: x_t at the bridge mean of x0 = 0 and s = 0 recover 0.
  const Tensor<double> zero = Tensor<double>::matrix(1, 3);
  const auto [mean, sd] = kKernel.bridge_stats(zero, xe, t);
  EXPECT_LT(std::sqrt(squared_norm(kKernel.x0_from_score(mean, t, xe, zero))), 1e-12);
  EXPECT_LT(std::sqrt(squared_norm(kKernel.score_from_x0(mean, t, xe, zero))), 1e-9);
}

TEST(Bridge, ScoreFromTrueX0IsBridgeScore) {
  RandomStream rng(19);
  const double t = 0.61;
  const Tensor<double> x0 = normals(2, 3, rng), xe = normals(2, 3, rng), xt = normals(2, 3, rng);
  EXPECT_EQ(max_abs_diff(kKernel.score_from_x0(xt, t, xe, x0), kKernel.bridge_score(xt, x0, xe, t)), 0.0);
}

TEST(Bridge, ForwardSimulationMatchesMarginal) {
  // Euler-Maruyama of dx = (f + g^2 h) dt + g dw from x0, 1-D, at t = 0.5.
  RandomStream rng(23);
  const double x0 = 0.8, xe = -1.2, t_stop = 0.5;
  const int paths = 4000, steps = 1000;
  const double dt = t_stop / steps;
  std::vector<double> x(paths, x0);
  const VpSchedule& s = kKernel.schedule();
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const auto [a, v] = kKernel.h_terms(t);
    const double b = s.beta(t), g = std::sqrt(b);
    for (double& xi : x) xi += (-0.5 * b * xi + b * (a / v) * (xe - a * xi)) * dt + g * std::sqrt(dt) * rng.normal();
  }
  double m = 0, q = 0;
  for (double xi : x) m += xi, q += xi * xi;
  m /= paths;
  const double var = q / paths - m * m;
  const BridgeCoefficients c = kKernel.coefficients(t_stop);
  const double mu = c.mean_start * x0 + c.mean_end * xe;
  EXPECT_LT(std::abs(m - mu), 3 * c.sigma_hat / std::sqrt(paths));
  EXPECT_LT(rel_err(var, c.var_hat), 0.08);
}

}  // namespace
}  // namespace dbae
