// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "dbae/dataset.hpp"
#include "dbae/errors.hpp"
#include "dbae/train.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

namespace dbae {
namespace {

using testing::normals;
using testing::small_model;
using testing::vp_kernel;

ad::Gradients<double> all_grads(ad::Tape<double>& tape, ad::Var<double> loss) { return tape.backward(loss); }

TEST(Train, LossFormsAgreePerSampleAndInGradient) {
  RandomStream rng(1);
  for (EncoderMode mode : {EncoderMode::deterministic, EncoderMode::gaussian}) {
    for (int rep = 0; rep < 20; ++rep) {
      const ModelBundle<double> b(small_model(3, 2, mode), vp_kernel(), rng.next_u64());
      const Tensor<double> batch = normals(16, 3, rng);
      const AeDraws<double> draws = draw_ae(b, batch.rows(), rng);
      ad::Tape<double> ta, tb;
      const auto sm = loss_ae_terms(ta, batch, b, draws, LossForm::score_matching);
      const auto xw = loss_ae_terms(tb, batch, b, draws, LossForm::x0_weighted);
      for (std::size_t i = 0; i < batch.rows(); ++i)
        EXPECT_LT(testing::rel_err(sm.per_sample.value()[i], xw.per_sample.value()[i]), 1e-6);
      const auto ga = all_grads(ta, sm.loss), gb = all_grads(tb, xw.loss);
      ASSERT_EQ(ga.size(), gb.size());
      for (const auto& [name, g] : ga) EXPECT_LT(testing::max_rel_diff(g, gb.at(name), 1e-8), 1e-5) << name;
    }
  }
}

TEST(Train, X0SimpleIsHalfSquaredError) {
  RandomStream rng(2);
  const ModelBundle<double> b(small_model(3, 2), vp_kernel(), 3);
  const Tensor<double> batch = normals(8, 3, rng);
  const AeDraws<double> draws = draw_ae(b, batch.rows(), rng);
  ad::Tape<double> tape;
  const auto terms = loss_ae_terms(tape, batch, b, draws, LossForm::x0_simple);
  // Recompute through the tensor API.
  const Tensor<double> z = b.encode(batch, nullptr).z;
  const Tensor<double> xe = b.decode(z);
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const Tensor<double> x0 = batch.rows_slice(i, 1), e = xe.rows_slice(i, 1), zi = z.rows_slice(i, 1);
    const auto [mean, sd] = b.bridge().bridge_stats(x0, e, draws.t[i]);
    Tensor<double> xt = mean;
    for (std::size_t k = 0; k < 3; ++k) xt[k] += sd * draws.bridge_noise(i, k);
    const Tensor<double> hat = b.predict_x0(xt, draws.t[i], e, &zi);
    const double expected = 0.5 * squared_norm(axpby(1.0, hat, -1.0, x0));
    EXPECT_LT(testing::rel_err(terms.per_sample.value()[i], expected), 1e-10);
  }
}

TEST(Train, OracleNetworkHasZeroScoreMatchingLoss) {
  RandomStream rng(3);
  const ModelBundle<double> b = testing::oracle_bundle<double>(2);
  const Tensor<double> batch = normals(64, 2, rng);
  ad::Tape<double> tape;
  const auto terms = loss_ae_terms(tape, batch, b, draw_ae(b, 64, rng), LossForm::score_matching);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_LT(terms.per_sample.value()[i], 1e-12);
}

double tc_of(const Tensor<double>& mean, double sigma, std::size_t dataset_size, RandomStream& rng) {
  const std::size_t b = mean.rows(), l = mean.cols();
  Tensor<double> ls = Tensor<double>::matrix(b, l, std::log(sigma));
  Tensor<double> z = mean;
  for (double& v : z.values()) v += sigma * rng.normal();
  ad::Tape<double> tape(false);
  return loss_tc(tape, tape.constant(mean), tape.constant(ls), tape.constant(z), dataset_size).value()[0];
}

TEST(Train, TcSingleDimensionIsZero) {
  RandomStream rng(4);
  EXPECT_NEAR(tc_of(normals(64, 1, rng), 0.3, 1000, rng), 0.0, 1e-12);
}

TEST(Train, TcFactorizedIsNearZero) {
  RandomStream rng(5);
  const double sigma = std::sqrt(0.05);
  const Tensor<double> mean = normals(2000, 2, rng, std::sqrt(0.95));
  EXPECT_NEAR(tc_of(mean, sigma, 2000, rng), 0.0, 0.03);
}

TEST(Train, TcCorrelatedMatchesClosedForm) {
  // Aggregate N(0, [[1, .9], [.9, 1]]) = posterior means N(0, C - s^2 I) + noise s^2 I.
  RandomStream rng(6);
  const double s2 = 0.05, rho = 0.9;
  const double closed = -0.5 * std::log(1 - rho * rho);
  EXPECT_NEAR(closed, 0.830, 5e-4);
  const std::size_t b = 2000;
  // Cholesky of [[1-s2, rho], [rho, 1-s2]].
  const double l11 = std::sqrt(1 - s2), l21 = rho / l11, l22 = std::sqrt(1 - s2 - l21 * l21);
  Tensor<double> mean = Tensor<double>::matrix(b, 2);
  for (std::size_t i = 0; i < b; ++i) {
    const double u = rng.normal(), v = rng.normal();
    mean(i, 0) = l11 * u;
    mean(i, 1) = l21 * u + l22 * v;
  }
  EXPECT_NEAR(tc_of(mean, std::sqrt(s2), b, rng), closed, 0.06);
}

TEST(Train, TcContracts) {
  RandomStream rng(7);
  const Tensor<double> m = normals(4, 2, rng);
  EXPECT_THROW(tc_of(m, 0.1, 3, rng), ContractError);
  EXPECT_THROW(tc_of(normals(1, 2, rng), 0.1, 10, rng), ContractError);
}

TEST(Train, TcGradientMatchesFd) {
  RandomStream rng(8);
  const Tensor<double> mean = normals(6, 2, rng), ls = normals(6, 2, rng, 0.3), z = normals(6, 2, rng);
  ad::Tape<double> tape;
  const auto mv = tape.param("m", mean), lv = tape.param("s", ls), zv = tape.param("z", z);
  const auto g = tape.backward(loss_tc(tape, mv, lv, zv, 100));
  auto value = [&](const Tensor<double>& m2, const Tensor<double>& l2, const Tensor<double>& z2) {
    ad::Tape<double> t(false);
    return loss_tc(t, t.constant(m2), t.constant(l2), t.constant(z2), 100).value()[0];
  };
  EXPECT_LT(testing::max_rel_diff(g.at("m"), testing::fd_gradient([&](const auto& x) { return value(x, ls, z); }, mean), 1e-3), 1e-7);
  EXPECT_LT(testing::max_rel_diff(g.at("s"), testing::fd_gradient([&](const auto& x) { return value(mean, x, z); }, ls), 1e-3), 1e-7);
  EXPECT_LT(testing::max_rel_diff(g.at("z"), testing::fd_gradient([&](const auto& x) { return value(mean, ls, x); }, z), 1e-3), 1e-7);
}

TEST(Train, TcWeightNeedsGaussianEncoder) {
  RandomStream rng(9);
  ModelBundle<float> b(small_model(2, 2), vp_kernel(), 1);
  TrainConfig cfg;
  cfg.tc_weight = 1.0;
  EXPECT_THROW(train_step(b, normals(8, 2, rng).cast<float>(), cfg, rng, 100), ContractError);
}

TEST(Train, NonFiniteLossIsNumericFault) {
  RandomStream rng(10);
  ModelBundle<float> b(small_model(2, 2), vp_kernel(), 1);
  Tensor<float> batch = normals(8, 2, rng).cast<float>();
  batch[3] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train_step(b, batch, TrainConfig{}, rng, 100), NumericFault);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  RandomStream rng(11);
  ModelBundle<float> b(small_model(2, 2), vp_kernel(), 1);
  const auto before = b.stores();
  std::array<std::uint64_t, 3> h{};
  for (int k = 0; k < 3; ++k) h[k] = before[k]->hash(true);
  TrainConfig cfg;
  cfg.lr = 0.0;
  cfg.ema_rate = 0.5;
  for (int i = 0; i < 5; ++i) train_step(b, normals(8, 2, rng).cast<float>(), cfg, rng, 100);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(b.stores()[k]->hash(true), h[k]);
}

std::vector<StepMetrics> run(std::uint64_t seed, std::size_t steps, const Tensor<float>& data,
                             ModelBundle<float>* out = nullptr) {
  ModelBundle<float> b(small_model(2, 2, EncoderMode::deterministic, 32), vp_kernel(), seed);
  TrainConfig cfg;
  cfg.batch_size = 64;
  cfg.lr = 2e-3;
  cfg.ema_rate = 0.99;
  cfg.total_steps = steps;
  cfg.log_every = 1;
  RandomStream rng(seed + 100);
  std::vector<StepMetrics> rows;
  TrainCallbacks cb;
  cb.on_metrics = [&](const StepMetrics& m) { rows.push_back(m); };
  train_loop(b, data, cfg, rng, 0, steps, cb);
  if (out) *out = b;
  return rows;
}

TEST(Train, SameSeedSameMetricStream) {
  RandomStream rng(12);
  const Dataset d = make_toy("two_moons", 512, rng);
  ModelBundle<float> a(small_model(2, 2), vp_kernel(), 0), b(small_model(2, 2), vp_kernel(), 0);
  const auto ra = run(3, 40, d.x, &a), rb = run(3, 40, d.x, &b);
  ASSERT_EQ(ra.size(), rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    EXPECT_EQ(ra[i].loss_ae, rb[i].loss_ae);
    EXPECT_EQ(ra[i].grad_norm, rb[i].grad_norm);
  }
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(*a.stores()[k] == *b.stores()[k]);
}

TEST(Train, LossDecreasesOnTwoMoons) {
  // Ratio of mean loss over the last 50 to the first 50 of 500 steps, median
  // over 5 seeds. Reference runs gave medians near 0.05; the baseline below is
  // the committed regression bound.
  constexpr double kBaseline = 0.25;
  RandomStream rng(13);
  const Dataset d = make_toy("two_moons", 2048, rng);
  std::vector<double> ratios;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto rows = run(seed, 500, d.x);
    double first = 0, last = 0;
    for (int i = 0; i < 50; ++i) first += rows[i].loss_ae, last += rows[rows.size() - 1 - i].loss_ae;
    ratios.push_back(last / first);
  }
  std::nth_element(ratios.begin(), ratios.begin() + 2, ratios.end());
  EXPECT_LT(ratios[2], kBaseline);
}

TEST(Train, MetricsEmittedOnScheduleAndAtEnd) {
  RandomStream rng(14);
  const Dataset d = make_toy("two_moons", 256, rng);
  ModelBundle<float> b(small_model(2, 2), vp_kernel(), 0);
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.log_every = 4;
  cfg.checkpoint_every = 5;
  std::vector<std::uint64_t> metric_steps, ckpt_steps;
  TrainCallbacks cb;
  cb.on_metrics = [&](const StepMetrics& m) { metric_steps.push_back(m.step); };
  cb.on_checkpoint = [&](std::uint64_t s) { ckpt_steps.push_back(s); };
  train_loop(b, d.x, cfg, rng, 0, 11, cb);
  EXPECT_EQ(metric_steps, (std::vector<std::uint64_t>{4, 8, 11}));
  EXPECT_EQ(ckpt_steps, (std::vector<std::uint64_t>{5, 10, 11}));
}

TEST(Train, LossFormNames) {
  for (LossForm f : {LossForm::score_matching, LossForm::x0_weighted, LossForm::x0_simple})
    EXPECT_EQ(loss_form_from_string(to_string(f)), f);
  EXPECT_THROW(loss_form_from_string("nope"), ConfigError);
}

}  // namespace
}  // namespace dbae
