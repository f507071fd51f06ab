// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/train.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dbae {

namespace {

template <class T>
Tensor<T> column(const std::vector<double>& v) {
  Tensor<T> out = Tensor<T>::matrix(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<T>(v[i]);
  return out;
}

}  // namespace

std::string to_string(LossForm form) {
  switch (form) {
    case LossForm::score_matching: return "score_matching";
    case LossForm::x0_weighted: return "x0_weighted";
    case LossForm::x0_simple: return "x0_simple";
  }
  return "?";
}

LossForm loss_form_from_string(const std::string& s) {
  if (s == "score_matching") return LossForm::score_matching;
  if (s == "x0_weighted") return LossForm::x0_weighted;
  if (s == "x0_simple") return LossForm::x0_simple;
  throw ConfigError("unknown loss form '" + s + "'");
}

template <class T>
AeDraws<T> draw_ae(const ModelBundle<T>& bundle, std::size_t rows, RandomStream& rng) {
  const BridgeKernel& k = bundle.bridge();
  AeDraws<T> d;
  d.t.resize(rows);
  for (double& t : d.t) t = rng.uniform(k.t_min(), k.t_max());
  d.bridge_noise = Tensor<T>::matrix(rows, bundle.data_dim());
  for (T& v : d.bridge_noise.values()) v = static_cast<T>(rng.normal());
  if (bundle.encoder_mode() == EncoderMode::gaussian) {
    d.encoder_noise = Tensor<T>::matrix(rows, bundle.latent_dim());
    for (T& v : d.encoder_noise->values()) v = static_cast<T>(rng.normal());
  }
  return d;
}

template <class T>
AeLossVars<T> loss_ae_terms(ad::Tape<T>& tape, const Tensor<T>& batch, const ModelBundle<T>& bundle,
                            const AeDraws<T>& draws, LossForm form) {
  const Tensor<T> x0_value = batch.as_matrix();
  const std::size_t n = x0_value.rows();
  if (draws.t.size() != n) throw ShapeError("loss_ae: draws do not match batch size");
  const BridgeKernel& kernel = bundle.bridge();

  std::vector<double> mean_start(n), mean_end(n), sigma_hat(n), inv_var(n), half_g2(n);
  std::vector<double> ca(n), cb(n), cg(n), half_lambda(n);
  for (std::size_t i = 0; i < n; ++i) {
    const BridgeCoefficients c = kernel.coefficients(draws.t[i]);
    mean_start[i] = c.mean_start;
    mean_end[i] = c.mean_end;
    sigma_hat[i] = c.sigma_hat;
    inv_var[i] = 1.0 / c.var_hat;
    half_g2[i] = 0.5 * kernel.schedule().beta(draws.t[i]);
    if (form == LossForm::x0_weighted) {
      const X0Coefficients k = kernel.x0_coeffs(draws.t[i]);
      ca[i] = k.alpha;
      cb[i] = k.beta;
      cg[i] = k.gamma;
      half_lambda[i] = 0.5 * k.lambda;
    }
  }
  auto col = [&](const std::vector<double>& v) { return tape.constant(column<T>(v)); };

  const ad::Var<T> x0 = tape.constant(x0_value);
  const EncodeVars<T> enc =
      bundle.encode(tape, x0, draws.encoder_noise ? &*draws.encoder_noise : nullptr);
  const ad::Var<T> x_end = bundle.decode(tape, enc.z);

  // x_t ~ q(x_t | x0, x_T): reparameterized so gradients reach the decoder.
  const ad::Var<T> mean_start_c = col(mean_start), mean_end_c = col(mean_end);
  const ad::Var<T> bridge_mean = ad::add(ad::mul(x0, mean_start_c), ad::mul(x_end, mean_end_c));
  const ad::Var<T> x_t = ad::add(bridge_mean, ad::mul(tape.constant(draws.bridge_noise), col(sigma_hat)));

  std::optional<ad::Var<T>> z_cond;
  if (bundle.config().score.use_z_condition) z_cond = enc.z;
  const ad::Var<T> x0_hat = bundle.predict_x0(tape, x_t, draws.t, x_end, z_cond);

  ad::Var<T> per_sample;
  if (form == LossForm::x0_simple) {
    per_sample = ad::scale(ad::row_sum(ad::square(ad::sub(x0_hat, x0))), 0.5);
  } else {
    // Model score through the pred-x parameterization.
    const ad::Var<T> inv_var_c = col(inv_var);
    const ad::Var<T> model_mean = ad::add(ad::mul(x0_hat, mean_start_c), ad::mul(x_end, mean_end_c));
    const ad::Var<T> score = ad::mul(ad::sub(model_mean, x_t), inv_var_c);
    if (form == LossForm::score_matching) {
      const ad::Var<T> target = ad::mul(ad::sub(bridge_mean, x_t), inv_var_c);
      per_sample = ad::mul(ad::row_sum(ad::square(ad::sub(score, target))), col(half_g2));
    } else {
      const ad::Var<T> x0_from_score =
          ad::add(ad::add(ad::mul(x_t, col(ca)), ad::mul(x_end, col(cb))), ad::mul(score, col(cg)));
      per_sample = ad::mul(ad::row_sum(ad::square(ad::sub(x0_from_score, x0))), col(half_lambda));
    }
  }
  return {per_sample, ad::mean(per_sample), enc};
}

template <class T>
ad::Var<T> loss_ae(ad::Tape<T>& tape, const Tensor<T>& batch, const ModelBundle<T>& bundle,
                   RandomStream& rng, LossForm form) {
  const AeDraws<T> draws = draw_ae(bundle, batch.rows(), rng);
  return loss_ae_terms(tape, batch, bundle, draws, form).loss;
}

template <class T>
ad::Var<T> loss_tc(ad::Tape<T>& tape, ad::Var<T> mean, ad::Var<T> log_sigma, ad::Var<T> z,
                   std::size_t dataset_size) {
  const std::size_t b = z.rows(), l = z.cols();
  if (b < 2) throw ContractError("loss_tc: batch must hold at least two samples");
  if (mean.rows() != b || mean.cols() != l || log_sigma.rows() != b || log_sigma.cols() != l)
    throw ShapeError("loss_tc: mean, log_sigma and z must share shape");
  if (dataset_size < b) throw ContractError("loss_tc: dataset_size smaller than the batch");

  const double n = static_cast<double>(dataset_size);
  const double m = static_cast<double>(b - 1);
  Tensor<T> log_w = Tensor<T>::matrix(b, b, static_cast<T>(-std::log(m)));
  for (std::size_t i = 0; i < b; ++i) {
    log_w(i, i) = static_cast<T>(-std::log(n));
    log_w(i, (i + 1) % b) = static_cast<T>(std::log((n - m) / (n * m)));
  }
  // With N = batch the stratified weight is tiny but positive.
  const ad::Var<T> log_w_c = tape.constant(log_w);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  // log q(z_ik | posterior j) as (b x b) for each latent dim k.
  std::vector<ad::Var<T>> per_dim;
  per_dim.reserve(l);
  for (std::size_t k = 0; k < l; ++k) {
    const ad::Var<T> zk = ad::slice_cols(z, k, 1);                           // b x 1
    const ad::Var<T> mk = ad::transpose(ad::slice_cols(mean, k, 1));         // 1 x b
    const ad::Var<T> lsk = ad::transpose(ad::slice_cols(log_sigma, k, 1));   // 1 x b
    const ad::Var<T> scaled_diff = ad::mul(ad::sub(zk, mk), ad::exp(ad::scale(lsk, -1.0)));
    per_dim.push_back(
        ad::add_scalar(ad::sub(ad::scale(ad::square(scaled_diff), -0.5), lsk), -half_log_2pi));
  }
  ad::Var<T> joint = per_dim.front();
  for (std::size_t k = 1; k < l; ++k) joint = ad::add(joint, per_dim[k]);
  const ad::Var<T> log_qz = ad::row_logsumexp(ad::add(joint, log_w_c));
  ad::Var<T> log_prod = ad::row_logsumexp(ad::add(per_dim.front(), log_w_c));
  for (std::size_t k = 1; k < l; ++k) log_prod = ad::add(log_prod, ad::row_logsumexp(ad::add(per_dim[k], log_w_c)));
  return ad::mean(ad::sub(log_qz, log_prod));
}

template <class T>
Tensor<T> sample_batch(const Tensor<T>& dataset, std::size_t batch_size, RandomStream& rng) {
  std::vector<std::size_t> idx(batch_size);
  for (std::size_t& i : idx) i = rng.index(dataset.rows());
  return dataset.as_matrix().gather_rows(idx);
}

template <class T>
StepMetrics train_step(ModelBundle<T>& bundle, const Tensor<T>& batch, const TrainConfig& cfg,
                       RandomStream& rng, std::size_t dataset_size) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.tc_weight > 0 && bundle.encoder_mode() != EncoderMode::gaussian)
    throw ContractError("train_step: tc_weight > 0 requires the gaussian encoder");

  ad::Tape<T> tape;
  const AeDraws<T> draws = draw_ae(bundle, batch.rows(), rng);
  const AeLossVars<T> ae = loss_ae_terms(tape, batch, bundle, draws, cfg.loss_form);
  ad::Var<T> total = ae.loss;
  double tc_value = 0;
  if (cfg.tc_weight > 0) {
    const ad::Var<T> tc = loss_tc(tape, *ae.encoding.mean, *ae.encoding.log_sigma, ae.encoding.z, dataset_size);
    tc_value = static_cast<double>(tc.value()[0]);
    total = ad::add(total, ad::scale(tc, cfg.tc_weight));
  }
  const double ae_value = static_cast<double>(ae.loss.value()[0]);
  if (!std::isfinite(ae_value) || !std::isfinite(tc_value)) {
    double t_lo = draws.t.front(), t_hi = draws.t.front();
    for (double t : draws.t) t_lo = std::min(t_lo, t), t_hi = std::max(t_hi, t);
    std::ostringstream msg;
    msg << "non-finite training loss at step " << bundle.score_params().step() + 1 << " (loss_ae=" << ae_value
        << ", loss_tc=" << tc_value << ", batch t in [" << t_lo << ", " << t_hi << "])";
    throw NumericFault(msg.str());
  }

  const ad::Gradients<T> grads = tape.backward(total);
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  double sq = 0;
  for (ParamStore<T>* store : bundle.stores()) {
    const ad::Gradients<T> g = gradients_for(*store, grads);
    const double norm = global_norm(g);
    sq += norm * norm;
    adam_step(*store, g, adam);
    ema_update(*store, cfg.ema_rate);
  }
  StepMetrics m;
  m.step = bundle.score_params().step();
  m.loss_ae = ae_value;
  m.loss_tc = tc_value;
  m.grad_norm = std::sqrt(sq);
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return m;
}

template <class T>
void train_loop(ModelBundle<T>& bundle, const Tensor<T>& dataset, const TrainConfig& cfg,
                RandomStream& rng, std::uint64_t start_step, std::uint64_t stop_step,
                const TrainCallbacks& callbacks) {
  if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
  for (std::uint64_t step = start_step + 1; step <= stop_step; ++step) {
    const Tensor<T> batch = sample_batch(dataset, cfg.batch_size, rng);
    StepMetrics m = train_step(bundle, batch, cfg, rng, dataset.rows());
    m.step = step;
    const bool last = step == stop_step;
    if (callbacks.on_metrics && (last || (cfg.log_every > 0 && step % cfg.log_every == 0)))
      callbacks.on_metrics(m);
    if (callbacks.on_checkpoint && (last || (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0)))
      callbacks.on_checkpoint(step);
  }
}

#define DBAE_INSTANTIATE(T)                                                                          \
  template AeDraws<T> draw_ae(const ModelBundle<T>&, std::size_t, RandomStream&);                    \
  template AeLossVars<T> loss_ae_terms(ad::Tape<T>&, const Tensor<T>&, const ModelBundle<T>&,        \
                                       const AeDraws<T>&, LossForm);                                 \
  template ad::Var<T> loss_ae(ad::Tape<T>&, const Tensor<T>&, const ModelBundle<T>&, RandomStream&, \
                              LossForm);                                                             \
  template ad::Var<T> loss_tc(ad::Tape<T>&, ad::Var<T>, ad::Var<T>, ad::Var<T>, std::size_t);        \
  template Tensor<T> sample_batch(const Tensor<T>&, std::size_t, RandomStream&);                     \
  template StepMetrics train_step(ModelBundle<T>&, const Tensor<T>&, const TrainConfig&,            \
                                  RandomStream&, std::size_t);                                       \
  template void train_loop(ModelBundle<T>&, const Tensor<T>&, const TrainConfig&, RandomStream&,     \
                           std::uint64_t, std::uint64_t, const TrainCallbacks&);

DBAE_INSTANTIATE(float)
DBAE_INSTANTIATE(double)

}  // namespace dbae
