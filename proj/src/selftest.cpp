// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <functional>

#include "dbae/pipeline.hpp"
#include "dbae/tensor_file.hpp"
#include "dbae/train.hpp"

namespace dbae {

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

Tensor<double> normals(std::size_t r, std::size_t c, RandomStream& rng) {
  Tensor<double> t = Tensor<double>::matrix(r, c);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

double schedule_identity(const BridgeKernel& k) {
  double worst = 0;
  const VpSchedule& s = k.schedule();
  for (int i = 0; i <= 200; ++i) {
    const double t = s.t_end() * i / 200.0;
    const auto [a, sd] = s.alpha_sigma(t);
    worst = std::max(worst, std::abs(a * a + sd * sd - 1.0));
    worst = std::max(worst, rel(s.integral_beta(t), s.integral_beta_quadrature(t)));
  }
  return worst;
}

double inversion(const BridgeKernel& k, RandomStream& rng) {
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const double t = rng.uniform(k.t_min(), k.t_max());
    const Tensor<double> x0 = normals(1, 3, rng), xe = normals(1, 3, rng), xt = normals(1, 3, rng);
    const Tensor<double> back = k.x0_from_score(xt, t, xe, k.bridge_score(xt, x0, xe, t));
    worst = std::max(worst, max_abs_diff(back, x0) / std::max(1.0, std::sqrt(squared_norm(x0))));
  }
  return worst;
}

double loss_forms_agree(const BridgeKernel& k, RandomStream& rng) {
  ModelConfig mc = ModelConfig::with_dims(2, 2);
  mc.encoder.hidden = mc.decoder.hidden = mc.score.hidden = 16;
  const ModelBundle<double> bundle(mc, k, rng.next_u64());
  const Tensor<double> batch = normals(32, 2, rng);
  const AeDraws<double> draws = draw_ae(bundle, batch.rows(), rng);
  ad::Tape<double> a, b;
  const auto sm = loss_ae_terms(a, batch, bundle, draws, LossForm::score_matching);
  const auto xw = loss_ae_terms(b, batch, bundle, draws, LossForm::x0_weighted);
  double worst = 0;
  for (std::size_t i = 0; i < batch.rows(); ++i)
    worst = std::max(worst, rel(sm.per_sample.value()[i], xw.per_sample.value()[i]));
  return worst;
}

double mi_bound(const BridgeKernel& k, RandomStream& rng) {
  double min_slack = INFINITY;
  for (int i = 0; i < 5; ++i) {
    const MiBoundResult r = mi_bound_check(random_linear_gaussian_instance(rng, 3, 2), k, 801);
    if (!r.holds) return -1;
    min_slack = std::min(min_slack, r.slack);
  }
  return min_slack;
}

bool tensor_round_trip(RandomStream& rng) {
  const Tensor<double> x = normals(7, 3, rng);
  const Tensor<double> y = decode_tensor(encode_tensor(x), "selftest").as<double>();
  return max_abs_diff(x, y) == 0 && x.shape() == y.shape();
}

}  // namespace

bool run_selftest(std::ostream& out) {
  const BridgeKernel kernel(VpSchedule::linear(0.1, 20.0));
  RandomStream rng(20260101);
  bool all = true;
  auto report = [&](const char* name, bool ok, double value) {
    out << "selftest " << name << ": " << (ok ? "pass" : "FAIL") << " (" << value << ")\n";
    all = all && ok;
  };
  const double s = schedule_identity(kernel);
  report("schedule", s < 1e-10, s);
  const double inv = inversion(kernel, rng);
  report("x0-score inversion", inv < 1e-8, inv);
  const double lf = loss_forms_agree(kernel, rng);
  report("loss forms", lf < 1e-6, lf);
  const double mi = mi_bound(kernel, rng);
  report("mi bound", mi >= -1e-9, mi);
  report("tensor file", tensor_round_trip(rng), 0);
  return all;
}

}  // namespace dbae
