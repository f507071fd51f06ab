// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "dbae/errors.hpp"
#include "dbae/eval.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

namespace dbae {
namespace {

using testing::normals;
using testing::vp_kernel;

/// Windowed SSIM computed directly in long double, one window at a time.
double reference_ssim(const std::vector<double>& a, const std::vector<double>& b, std::size_t side,
                      std::size_t win) {
  const long double c1 = 0.0001L, c2 = 0.0009L;
  long double total = 0;
  std::size_t count = 0;
  for (std::size_t r = 0; r + win <= side; ++r) {
    for (std::size_t c = 0; c + win <= side; ++c) {
      std::vector<long double> pa, pb;
      for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) pa.push_back(a[(r + i) * side + c + j]), pb.push_back(b[(r + i) * side + c + j]);
      const long double n = pa.size();
      long double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
      for (std::size_t k = 0; k < pa.size(); ++k) ma += pa[k], mb += pb[k];
      ma /= n, mb /= n;
      for (std::size_t k = 0; k < pa.size(); ++k)
        saa += (pa[k] - ma) * (pa[k] - ma), sbb += (pb[k] - mb) * (pb[k] - mb), sab += (pa[k] - ma) * (pb[k] - mb);
      saa /= n, sbb /= n, sab /= n;
      total += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (saa + sbb + c2));
      ++count;
    }
  }
  return static_cast<double>(total / count);
}

TEST(Recon, MseAndSsimBasics) {
  RandomStream rng(1);
  const Tensor<double> x = normals(3, 64, rng);
  EXPECT_EQ(recon_error(x, x, ReconMetric::mse), 0.0);
  EXPECT_NEAR(recon_error(x, x, ReconMetric::ssim_window), 1.0, 1e-12);
  EXPECT_EQ(recon_error(Tensor<double>::matrix(2, 64, 0.0), Tensor<double>::matrix(2, 64, 1.0), ReconMetric::mse), 1.0);
  EXPECT_THROW(recon_error(normals(2, 5, rng), normals(2, 5, rng), ReconMetric::ssim_window), ContractError);
  EXPECT_THROW(recon_error(normals(2, 5, rng), normals(2, 4, rng), ReconMetric::mse), ShapeError);
  EXPECT_EQ(recon_metric_from_string(to_string(ReconMetric::ssim_window)), ReconMetric::ssim_window);
  EXPECT_THROW(recon_metric_from_string("psnr"), ConfigError);
}

TEST(Recon, SsimMatchesDirectComputation) {
  RandomStream rng(2);
  std::vector<double> a(64), b(64);
  for (std::size_t i = 0; i < 64; ++i) {
    a[i] = rng.uniform(0, 1);
    b[i] = std::clamp(a[i] + 0.2 * rng.normal(), 0.0, 1.0);
  }
  const double ref = reference_ssim(a, b, 8, 3);
  EXPECT_NEAR(ssim_image(a, b, SsimOptions{}), ref, 1e-12);
  EXPECT_GT(ref, 0.0);
  EXPECT_LT(ref, 1.0);
}

TEST(Probe, SeparableLabelsGivePerfectAuroc) {
  // Points within 0.5 of the boundary are dropped so the classes have a margin.
  RandomStream rng(3);
  std::vector<double> rows, labels;
  while (labels.size() < 400) {
    const double a = rng.normal(), b = rng.normal();
    const double m = a - 0.5 * b - 0.1;
    if (std::abs(m) < 0.5) continue;
    rows.push_back(a), rows.push_back(b), labels.push_back(m > 0 ? 1.0 : 0.0);
  }
  const Tensor<double> z(Shape{400, 2}, rows);
  EXPECT_EQ(probe_scores(fit_probe_logistic(z, labels), z, labels).auroc, 1.0);
  EXPECT_EQ(probe_scores(fit_probe_ridge(z, Tensor<double>(Shape{400, 1}, labels)), z, labels).auroc, 1.0);
}

TEST(Probe, IndependentLabelsGiveChanceAuroc) {
  RandomStream rng(4);
  const std::size_t n = 4000;
  const Tensor<double> z = normals(n, 2, rng);
  std::vector<double> labels(n);
  for (double& v : labels) v = rng.uniform(0, 1) < 0.5 ? 1.0 : 0.0;
  const Tensor<double> z_test = normals(n, 2, rng);
  const double a = probe_scores(fit_probe_logistic(z, labels), z_test, labels).auroc;
  // AUROC of unrelated scores has standard error about sqrt(1 / (3 n)).
  EXPECT_NEAR(a, 0.5, 4 * std::sqrt(1.0 / (3.0 * n)));
}

TEST(Probe, RidgeRecoversNoiselessWeights) {
  RandomStream rng(5);
  const Tensor<double> z = normals(200, 1, rng);
  Tensor<double> y = Tensor<double>::matrix(200, 1);
  for (std::size_t i = 0; i < 200; ++i) y(i, 0) = -1.75 * z(i, 0) + 0.3;
  const ProbeModel m = fit_probe_ridge(z, y);
  EXPECT_NEAR(m.w(0, 0), -1.75, 1e-6);
  EXPECT_NEAR(m.b[0], 0.3, 1e-6);

  const Tensor<double> z3 = normals(300, 3, rng);
  Tensor<double> y2 = Tensor<double>::matrix(300, 2);
  for (std::size_t i = 0; i < 300; ++i) {
    y2(i, 0) = z3(i, 0) - 2 * z3(i, 2);
    y2(i, 1) = 0.5 * z3(i, 1) + 1;
  }
  const ProbeModel m2 = fit_probe_ridge(z3, y2);
  EXPECT_LT(max_abs_diff(m2.predict(z3), y2), 1e-6);
}

TEST(Probe, AurocInvariantUnderAffineMapAfterRefit) {
  RandomStream rng(6);
  const std::size_t n = 600;
  const Tensor<double> z = normals(n, 2, rng);
  std::vector<double> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = z(i, 0) + 0.7 * z(i, 1) + rng.normal() > 0 ? 1.0 : 0.0;
  Tensor<double> zt = Tensor<double>::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    zt(i, 0) = 3.0 * z(i, 0) - 1.0 * z(i, 1) + 5.0;
    zt(i, 1) = 0.5 * z(i, 0) + 2.0 * z(i, 1) - 2.0;
  }
  const double a = probe_scores(fit_probe_logistic(z, labels), z, labels).auroc;
  const double b = probe_scores(fit_probe_logistic(zt, labels), zt, labels).auroc;
  EXPECT_NEAR(a, b, 1e-4);
  const Tensor<double> y(Shape{n, 1}, labels);
  EXPECT_NEAR(probe_scores(fit_probe_ridge(z, y), z, labels).auroc,
              probe_scores(fit_probe_ridge(zt, y), zt, labels).auroc, 1e-4);
}

TEST(Probe, AurocTiesAndDegenerateLabels) {
  const std::vector<double> s{0.1, 0.4, 0.4, 0.9}, y{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auroc(s, y), 0.875);
  const std::vector<double> one_class{1, 1, 1, 1};
  EXPECT_THROW(auroc(s, one_class), ContractError);
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0, 1e-12);
}

TEST(SlicedWasserstein, ZeroOnIdenticalSetsAndSymmetric) {
  RandomStream rng(7);
  const Tensor<double> a = normals(300, 3, rng), b = normals(250, 3, rng, 1.5);
  EXPECT_EQ(sliced_wasserstein(a, a, 64, 9), 0.0);
  EXPECT_EQ(sliced_wasserstein(a, b, 64, 9), sliced_wasserstein(b, a, 64, 9));
  EXPECT_GT(sliced_wasserstein(a, b, 64, 9), 0.0);
  EXPECT_THROW(sliced_wasserstein(a, normals(4, 2, rng), 8), ShapeError);
}

TEST(SlicedWasserstein, ShiftGivesMeanAbsoluteProjection) {
  RandomStream rng(8);
  const Tensor<double> a = normals(500, 2, rng);
  const double v[2] = {0.6, -0.3};
  Tensor<double> b = a;
  for (std::size_t i = 0; i < b.rows(); ++i) b(i, 0) += v[0], b(i, 1) += v[1];
  const std::size_t k = 2000;
  const double sw = sliced_wasserstein(a, b, k, 11);
  // Same directions drawn directly: each 1-D distance is |<u, v>|.
  RandomStream dirs(11);
  double direct = 0;
  for (std::size_t p = 0; p < k; ++p) {
    const double u0 = dirs.normal(), u1 = dirs.normal();
    direct += std::abs(u0 * v[0] + u1 * v[1]) / std::hypot(u0, u1);
  }
  direct /= k;
  EXPECT_NEAR(sw, direct, 1e-10);
  // In 2-D, E|<u, v>| = 2 |v| / pi.
  const double norm_v = std::hypot(v[0], v[1]);
  EXPECT_NEAR(sw, 2 * norm_v / std::numbers::pi, 4 * 0.31 * norm_v / std::sqrt(static_cast<double>(k)));
}

TEST(SlicedWasserstein, OneDimensionalExact) {
  EXPECT_DOUBLE_EQ(wasserstein_1d({0, 1}, {0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein_1d({0, 2}, {1}), 1.0);
  // Unequal sizes: quantiles of {0, 1, 2} against {0, 3} split at 1/3 and 1/2.
  const double expect = std::sqrt((1.0 / 3) * 0 + (1.0 / 6) * 1 + (1.0 / 6) * 4 + (1.0 / 3) * 1);
  EXPECT_NEAR(wasserstein_1d({2, 0, 1}, {3, 0}), expect, 1e-15);
}

Tensor<double> correlated(std::size_t n, double rho, RandomStream& rng) {
  Tensor<double> z = Tensor<double>::matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal();
    z(i, 0) = a;
    z(i, 1) = rho * a + std::sqrt(1 - rho * rho) * b;
  }
  return z;
}

TEST(LatentStats, GaussianTotalCorrelation) {
  RandomStream rng(9);
  const std::size_t n = 100000;
  EXPECT_NEAR(latent_stats(normals(n, 3, rng)).gaussian_tc, 0.0, 1e-3);
  const LatentStats s = latent_stats(correlated(n, 0.9, rng));
  EXPECT_NEAR(s.gaussian_tc, -0.5 * std::log(1 - 0.81), 0.01);
  EXPECT_NEAR(s.gaussian_tc, 0.830, 0.01);
  EXPECT_NEAR(s.std[0], 1.0, 0.01);
  EXPECT_NEAR(s.covariance(0, 1), 0.9, 0.01);
  EXPECT_THROW(latent_stats(normals(2, 3, rng)), ContractError);
}

TEST(LatentStats, ScaleInvariantPerDimension) {
  RandomStream rng(10);
  const Tensor<double> z = correlated(2000, 0.6, rng);
  Tensor<double> zs = z;
  for (std::size_t i = 0; i < z.rows(); ++i) zs(i, 0) = 4 * z(i, 0) - 1, zs(i, 1) = -0.2 * z(i, 1) + 3;
  EXPECT_NEAR(latent_stats(zs).gaussian_tc, latent_stats(z).gaussian_tc, 1e-10);
}

TEST(MiBound, HoldsOnRandomInstances) {
  RandomStream rng(11);
  for (int i = 0; i < 20; ++i) {
    const std::size_t d = 1 + rng.index(4);
    const std::size_t l = 1 + rng.index(d);
    const MiBoundResult r = mi_bound_check(random_linear_gaussian_instance(rng, d, l), vp_kernel(), 801);
    EXPECT_TRUE(r.holds) << "instance " << i << " slack " << r.slack;
    EXPECT_TRUE(std::isfinite(r.l_denoising_clamped));
    EXPECT_GE(r.l_denoising_clamped, r.l_sm);
  }
}

TEST(MiBound, IndependentEncoderHasZeroInformation) {
  LinearGaussianInstance inst;
  inst.data_cov = Tensor<double>(Shape{2, 2}, std::vector<double>{1.0, 0.3, 0.3, 2.0});
  inst.encoder = Tensor<double>::matrix(1, 2);
  inst.encoder_noise = 0.5;
  inst.decoder = Tensor<double>(Shape{2, 1}, std::vector<double>{1.0, -1.0});
  const MiBoundResult r = mi_bound_check(inst, vp_kernel(), 801);
  EXPECT_NEAR(r.mi, 0.0, 1e-12);
  EXPECT_NEAR(r.cond_entropy, r.data_entropy, 1e-9);
  EXPECT_TRUE(r.holds);
  EXPECT_GE(r.l_ae, r.data_entropy - 1e-9);
}

TEST(MiBound, OneDimensionalClosedForm) {
  const double noise = 0.2;
  LinearGaussianInstance inst;
  inst.data_cov = Tensor<double>::matrix(1, 1, 1.0);
  inst.encoder = Tensor<double>::matrix(1, 1, 1.0);
  inst.encoder_noise = noise;
  inst.decoder = Tensor<double>::matrix(1, 1, 0.7);
  const MiBoundResult r = mi_bound_check(inst, vp_kernel(), 801);
  const double snr = 1.0 / (noise * noise);
  EXPECT_NEAR(r.mi, 0.5 * std::log(1 + snr), 1e-12);
  const double log_2pi_e = std::log(2 * std::numbers::pi * std::numbers::e);
  EXPECT_NEAR(r.data_entropy, 0.5 * log_2pi_e, 1e-12);
  EXPECT_NEAR(r.cond_entropy, 0.5 * (log_2pi_e + std::log(noise * noise / (1 + noise * noise))), 1e-12);
  // Invertible decoder and exact score: the bound is tight.
  EXPECT_NEAR(r.slack, 0.0, 1e-9);
  EXPECT_TRUE(r.holds);
}

TEST(MiBound, SlackGrowsWithMismatch) {
  RandomStream rng(12);
  LinearGaussianInstance inst = random_linear_gaussian_instance(rng, 3, 2);
  double prev = -1;
  for (double k : {0.0, 0.05, 0.1, 0.2, 0.4, 0.8}) {
    inst.mismatch = k;
    const MiBoundResult r = mi_bound_check(inst, vp_kernel(), 801);
    EXPECT_GT(r.slack, prev);
    prev = r.slack;
  }
  inst.encoder_noise = 0;
  EXPECT_THROW(mi_bound_check(inst, vp_kernel()), ContractError);
}

TEST(EvalReport, AppendsRowsUnderOneHeader) {
  const testing::TempDir dir("eval");
  const std::string path = dir / "eval.csv";
  append_eval_report(path, {{"recon_mse", 0.25}}, "abc", 3);
  append_eval_report(path, {{"gaussian_tc", 1.5}, {"probe_auroc", 0.75}}, "abc", 3);
  std::ifstream in(path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(text, "metric,value,config_hash,seed\nrecon_mse,0.25,abc,3\ngaussian_tc,1.5,abc,3\nprobe_auroc,0.75,abc,3\n");
}

}  // namespace
}  // namespace dbae
