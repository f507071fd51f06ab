// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "dbae/errors.hpp"
#include "model_fixtures.hpp"
#include "test_util.hpp"

namespace dbae {
namespace {

using testing::normals;
using testing::small_model;
using testing::vp_kernel;

TEST(Model, ConfigDimsMustAgree) {
  ModelConfig mc = ModelConfig::with_dims(4, 2);
  EXPECT_NO_THROW(mc.validate());
  mc.decoder.data_dim = 3;
  EXPECT_THROW(mc.validate(), ConfigError);
  EXPECT_THROW(ModelConfig::with_dims(2, 3).validate(), ConfigError);
  mc = ModelConfig::with_dims(4, 2);
  mc.score.latent_dim = 1;
  EXPECT_THROW(ModelBundle<double>(mc, vp_kernel(), 0), ConfigError);
}

TEST(Model, DeterministicEncodeDecodeAreRepeatable) {
  RandomStream rng(1);
  const ModelBundle<double> b(small_model(4, 2), vp_kernel(), 7);
  const Tensor<double> x = normals(5, 4, rng);
  const auto z1 = b.encode(x, nullptr).z, z2 = b.encode(x, nullptr).z;
  EXPECT_EQ(max_abs_diff(z1, z2), 0.0);
  EXPECT_EQ(z1.cols(), 2u);
  const auto e1 = b.decode(z1), e2 = b.decode(z1);
  EXPECT_EQ(max_abs_diff(e1, e2), 0.0);
  EXPECT_EQ(e1.cols(), 4u);
  // A deterministic encoder consumes no random draws even when a stream is given.
  RandomStream probe(5);
  (void)b.encode(x, &probe);
  EXPECT_EQ(probe.draws(), 0u);
}

TEST(Model, GaussianEncoderNeedsRandomStream) {
  RandomStream rng(2);
  const ModelBundle<double> b(small_model(4, 2, EncoderMode::gaussian), vp_kernel(), 7);
  EXPECT_THROW(b.encode(normals(3, 4, rng), nullptr), ContractError);
}

TEST(Model, GaussianZeroNoiseGivesMean) {
  RandomStream rng(3);
  const ModelBundle<double> b(small_model(4, 2, EncoderMode::gaussian), vp_kernel(), 7);
  const Tensor<double> x = normals(6, 4, rng);
  const Encoding<double> e = b.encode_with_noise(x, Tensor<double>::matrix(6, 2));
  ASSERT_TRUE(e.mean && e.log_sigma);
  EXPECT_EQ(max_abs_diff(e.z, *e.mean), 0.0);
  EXPECT_EQ(max_abs_diff(b.encode_mean(x).z, *e.mean), 0.0);
}

TEST(Model, GaussianSampleVarianceMatchesSigma) {
  RandomStream rng(4);
  const ModelBundle<double> b(small_model(3, 2, EncoderMode::gaussian), vp_kernel(), 8);
  const Tensor<double> row = normals(1, 3, rng);
  const std::size_t n = 10000;
  Tensor<double> x = Tensor<double>::matrix(n, 3);
  for (std::size_t i = 0; i < n; ++i) std::copy(row.values().begin(), row.values().end(), x.row(i).begin());
  const Encoding<double> e = b.encode(x, &rng);
  for (std::size_t k = 0; k < 2; ++k) {
    double m = 0, q = 0;
    for (std::size_t i = 0; i < n; ++i) m += e.z(i, k), q += e.z(i, k) * e.z(i, k);
    m /= n;
    const double var = q / n - m * m;
    const double sigma = std::exp((*e.log_sigma)(0, k));
    EXPECT_LT(testing::rel_err(var, sigma * sigma), 0.05) << k;
    EXPECT_GT(sigma, kMinEncoderSigma);
    EXPECT_LT(sigma, kMaxEncoderSigma);
  }
}

TEST(Model, DecodeGradientMatchesFd) {
  RandomStream rng(5);
  const ModelBundle<double> b(small_model(4, 2), vp_kernel(), 9);
  const Tensor<double> z = normals(3, 2, rng), w = normals(3, 4, rng);
  auto f = [&](const Tensor<double>& zz) {
    const Tensor<double> e = b.decode(zz);
    double s = 0;
    for (std::size_t i = 0; i < e.size(); ++i) s += e[i] * w[i];
    return s;
  };
  ad::Tape<double> tape;
  const auto zv = tape.param("z", z);
  tape.backward(ad::sum(ad::mul(b.decode(tape, zv), tape.constant(w))));
  const auto fd = testing::fd_gradient(f, z);
  EXPECT_LT(testing::max_rel_diff(tape.grad_of(zv), fd, 1e-3), 1e-7);
}

TEST(Model, PredictX0ShapesAndConditioning) {
  RandomStream rng(6);
  const ModelBundle<double> b(small_model(4, 2), vp_kernel(), 10);
  const Tensor<double> xt = normals(3, 4, rng), xe = normals(3, 4, rng), z = normals(3, 2, rng);
  const Tensor<double> x0 = b.predict_x0(xt, 0.3, xe, &z);
  EXPECT_EQ(x0.rows(), 3u);
  EXPECT_EQ(x0.cols(), 4u);
  EXPECT_EQ(max_abs_diff(x0, b.predict_x0(xt, 0.3, xe, &z)), 0.0);
  EXPECT_THROW(b.predict_x0(xt, 0.3, xe, nullptr), ContractError);

  ModelConfig mc = small_model(4, 2);
  mc.score.use_z_condition = false;
  const ModelBundle<double> nz(mc, vp_kernel(), 10);
  EXPECT_NO_THROW(nz.predict_x0(xt, 0.3, xe, nullptr));
}

TEST(Model, ScoreRoundTripsThroughX0) {
  RandomStream rng(7);
  const ModelBundle<double> b(small_model(4, 2), vp_kernel(), 11);
  const Tensor<double> xt = normals(3, 4, rng), xe = normals(3, 4, rng), z = normals(3, 2, rng);
  for (double t : {0.01, 0.3, 0.9}) {
    const Tensor<double> s = b.score(xt, t, xe, &z);
    const Tensor<double> back = b.bridge().x0_from_score(xt, t, xe, s);
    EXPECT_LT(testing::max_rel_diff(back, b.predict_x0(xt, t, xe, &z)), 1e-10) << t;
  }
}

TEST(Model, OracleNetworkGivesBridgeScore) {
  RandomStream rng(8);
  const ModelBundle<double> b = testing::oracle_bundle<double>(3);
  const Tensor<double> x0 = normals(4, 3, rng), xt = normals(4, 3, rng);
  const Tensor<double> z = b.encode(x0, nullptr).z;
  const Tensor<double> xe = b.decode(z);
  EXPECT_EQ(max_abs_diff(b.predict_x0(xt, 0.4, xe, &z), x0), 0.0);
  EXPECT_LT(testing::max_rel_diff(b.score(xt, 0.4, xe, &z), b.bridge().bridge_score(xt, x0, xe, 0.4)), 1e-12);
}

TEST(Model, ComposedScorePathMatchesFd) {
  // d/dx_t of sum(w * x0_hat) through the graph against central differences.
  RandomStream rng(9);
  const ModelBundle<double> b(small_model(3, 2), vp_kernel(), 12);
  const Tensor<double> xt = normals(2, 3, rng), xe = normals(2, 3, rng), z = normals(2, 2, rng),
                       w = normals(2, 3, rng);
  const std::vector<double> t{0.25, 0.25};
  ad::Tape<double> tape;
  const auto xv = tape.param("x", xt);
  const auto out = b.predict_x0(tape, xv, t, tape.constant(xe), tape.constant(z));
  tape.backward(ad::sum(ad::mul(out, tape.constant(w))));
  const auto fd = testing::fd_gradient(
      [&](const Tensor<double>& x) {
        const Tensor<double> o = b.predict_x0(x, 0.25, xe, &z);
        double s = 0;
        for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * w[i];
        return s;
      },
      xt);
  EXPECT_LT(testing::max_rel_diff(tape.grad_of(xv), fd, 1e-3), 1e-7);
}

TEST(Model, CastPreservesParameters) {
  const ModelBundle<float> f(small_model(4, 2), vp_kernel(), 13);
  const ModelBundle<double> d = f.cast<double>();
  const ModelBundle<float> back = d.cast<float>();
  for (std::size_t k = 0; k < 3; ++k) EXPECT_TRUE(*f.stores()[k] == *back.stores()[k]);
}

TEST(Model, InitSeedDeterminesParameters) {
  const ModelBundle<float> a(small_model(4, 2), vp_kernel(), 21), b(small_model(4, 2), vp_kernel(), 21),
      c(small_model(4, 2), vp_kernel(), 22);
  EXPECT_EQ(a.score_params().hash(true), b.score_params().hash(true));
  EXPECT_NE(a.score_params().hash(true), c.score_params().hash(true));
}

}  // namespace
}  // namespace dbae
