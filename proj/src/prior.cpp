// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/prior.hpp"

#include <cmath>

#include "dbae/log.hpp"

namespace dbae {

std::string to_string(PriorLoss loss) { return loss == PriorLoss::l1 ? "l1" : "l2"; }

PriorLoss prior_loss_from_string(const std::string& s) {
  if (s == "l1" || s == "L1") return PriorLoss::l1;
  if (s == "l2" || s == "L2") return PriorLoss::l2;
  throw ConfigError("unknown prior loss '" + s + "'");
}

ZStats fit_z_stats(const Tensor<double>& z) {
  const Tensor<double> m = z.as_matrix();
  const std::size_t n = m.rows(), l = m.cols();
  if (n < 2) throw DegenerateLatentError("fit_z_stats: need at least two codes");
  ZStats s;
  s.mean.assign(l, 0.0);
  s.std.assign(l, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < l; ++k) s.mean[k] += m(i, k);
  for (double& v : s.mean) v /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < l; ++k) s.std[k] += (m(i, k) - s.mean[k]) * (m(i, k) - s.mean[k]);
  for (std::size_t k = 0; k < l; ++k) {
    s.std[k] = std::sqrt(s.std[k] / static_cast<double>(n - 1));
    if (!(s.std[k] > 1e-12 * std::max(1.0, std::abs(s.mean[k]))))
      throw DegenerateLatentError("fit_z_stats: latent dimension " + std::to_string(k) +
                                  " has zero spread");
  }
  return s;
}

template <class T>
Tensor<T> normalize_z(const Tensor<T>& z, const ZStats& stats) {
  if (z.cols() != stats.dim()) throw ShapeError("normalize_z: latent dim does not match stats");
  Tensor<T> out = z.as_matrix();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t k = 0; k < out.cols(); ++k)
      out(i, k) = static_cast<T>((static_cast<double>(out(i, k)) - stats.mean[k]) / stats.std[k]);
  return out;
}

template <class T>
Tensor<T> denormalize_z(const Tensor<T>& z, const ZStats& stats) {
  if (z.cols() != stats.dim()) throw ShapeError("denormalize_z: latent dim does not match stats");
  Tensor<T> out = z.as_matrix();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t k = 0; k < out.cols(); ++k)
      out(i, k) = static_cast<T>(static_cast<double>(out(i, k)) * stats.std[k] + stats.mean[k]);
  return out;
}

template <class T>
Tensor<T> encode_dataset(const ModelBundle<T>& bundle, const Tensor<T>& dataset, RandomStream* rng,
                         std::size_t chunk) {
  const Tensor<T> x = dataset.as_matrix();
  Tensor<T> out = Tensor<T>::matrix(x.rows(), bundle.latent_dim());
  for (std::size_t begin = 0; begin < x.rows(); begin += chunk) {
    const std::size_t count = std::min(chunk, x.rows() - begin);
    const Encoding<T> e = bundle.encode(x.rows_slice(begin, count), rng, Weights::ema);
    std::copy(e.z.values().begin(), e.z.values().end(), out.values().begin() + begin * bundle.latent_dim());
  }
  return out;
}

template <class T>
ZStats fit_z_stats(const Tensor<T>& dataset, const ModelBundle<T>& bundle, RandomStream* rng) {
  return fit_z_stats(encode_dataset(bundle, dataset, rng));
}

Tensor<double> ddim_map(const VpSchedule& schedule, const EpsFn& eps, Tensor<double> z,
                        std::size_t steps, GridSpacing spacing) {
  if (steps == 0) throw ContractError("ddim: steps must be positive");
  const double t_end = schedule.t_end();
  const auto node = [&](std::size_t k) {
    const double u = static_cast<double>(k) / static_cast<double>(steps);
    return t_end * (spacing == GridSpacing::quadratic ? u * u : u);
  };
  for (std::size_t k = steps; k >= 1; --k) {
    const double t = node(k);
    const double s = node(k - 1);
    const auto [a_t, sig_t] = schedule.alpha_sigma(t);
    const auto [a_s, sig_s] = schedule.alpha_sigma(s);
    const Tensor<double> e = eps(z, t);
    require_same_shape(e, z, "ddim");
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double z0 = (z[i] - sig_t * e[i]) / a_t;
      z[i] = a_s * z0 + sig_s * e[i];
    }
  }
  return z;
}

Tensor<double> ddim_sample(const VpSchedule& schedule, const EpsFn& eps, std::size_t n,
                           std::size_t dim, std::size_t steps, RandomStream& rng, GridSpacing spacing) {
  Tensor<double> z = Tensor<double>::matrix(n, dim);
  for (double& v : z.values()) v = rng.normal();
  return ddim_map(schedule, eps, std::move(z), steps, spacing);
}

template <class T>
LatentPrior<T>::LatentPrior(LatentPriorConfig config, std::size_t latent_dim, std::uint64_t init_seed)
    : config_(config),
      schedule_(VpSchedule::constant(config.beta, static_cast<double>(config.steps))),
      latent_dim_(latent_dim) {
  if (latent_dim == 0) throw ConfigError("prior: latent_dim must be positive");
  if (config.steps == 0) throw ConfigError("prior: steps must be positive");
  if (config.time_dim % 2 != 0) throw ConfigError("prior: time_dim must be even");
  std::vector<std::size_t> widths{latent_dim + config.time_dim};
  for (std::size_t i = 0; i < config.depth; ++i) widths.push_back(config.hidden);
  widths.push_back(latent_dim);
  net_ = Mlp<T>("prior", widths);
  RandomStream rng(init_seed);
  net_.init(params_, rng);
}

template <class T>
void LatentPrior<T>::set_stats(ZStats stats) {
  if (stats.dim() != latent_dim_ || stats.std.size() != latent_dim_)
    throw ShapeError("prior: stats dim does not match latent dim");
  for (double s : stats.std)
    if (!(s > 0)) throw DegenerateLatentError("prior: z-norm std must be positive");
  stats_ = std::move(stats);
}

template <class T>
ad::Var<T> LatentPrior<T>::predict_eps(ad::Tape<T>& tape, ad::Var<T> z_t, std::span<const double> t,
                                       Weights w) const {
  std::vector<double> scaled_t(t.begin(), t.end());
  for (double& v : scaled_t) v /= schedule_.t_end();
  const ad::Var<T> emb = tape.constant(time_embed<T>(scaled_t, config_.time_dim));
  return net_.forward(tape, params_, ad::concat_cols<T>({z_t, emb}), w);
}

template <class T>
Tensor<T> LatentPrior<T>::predict_eps(const Tensor<T>& z_t, double t, Weights w) const {
  ad::Tape<T> tape(false);
  const std::vector<double> ts(z_t.rows(), t);
  return predict_eps(tape, tape.constant(z_t.as_matrix()), ts, w).value();
}

template <class T>
Tensor<T> LatentPrior<T>::sample(std::size_t n, RandomStream& rng, std::size_t steps) const {
  if (stats_.empty()) throw ContractError("prior: sampling requires z-norm stats");
  const EpsFn eps = [this](const Tensor<double>& z, double t) {
    return predict_eps(z.template cast<T>(), t, Weights::ema).template cast<double>();
  };
  const Tensor<double> z =
      ddim_sample(schedule_, eps, n, latent_dim_, steps ? steps : config_.sample_steps, rng,
                  config_.sample_spacing);
  return denormalize_z(z, stats_).template cast<T>();
}

template <class T>
ad::Var<T> loss_prior(ad::Tape<T>& tape, const Tensor<T>& z_normalized, const VpSchedule& schedule,
                      PriorLoss loss, const EpsGraphFn<T>& eps_hat, RandomStream& rng) {
  const Tensor<T> z0 = z_normalized.as_matrix();
  const std::size_t n = z0.rows(), l = z0.cols();

  double sq = 0, mean = 0;
  for (T v : z0.values()) mean += static_cast<double>(v), sq += static_cast<double>(v) * static_cast<double>(v);
  mean /= static_cast<double>(z0.size());
  const double sd = std::sqrt(std::max(0.0, sq / static_cast<double>(z0.size()) - mean * mean));
  if (n > 1 && (sd < 0.25 || sd > 4.0))
    log::warn("loss_prior: latent batch std " + std::to_string(sd) + " is far from 1; normalize first");

  std::vector<double> t(n);
  const double t_end = schedule.t_end();
  for (double& v : t) v = t_end * (1.0 - rng.uniform());  // (0, t_end]
  Tensor<T> eps = Tensor<T>::matrix(n, l);
  for (T& v : eps.values()) v = static_cast<T>(rng.normal());
  Tensor<T> z_t = Tensor<T>::matrix(n, l);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [a, s] = schedule.alpha_sigma(t[i]);
    for (std::size_t k = 0; k < l; ++k)
      z_t(i, k) = static_cast<T>(a * static_cast<double>(z0(i, k)) + s * static_cast<double>(eps(i, k)));
  }
  const ad::Var<T> resid = ad::sub(eps_hat(tape, tape.constant(z_t), t), tape.constant(eps));
  const ad::Var<T> per = loss == PriorLoss::l1 ? ad::abs(resid) : ad::square(resid);
  return ad::scale(ad::sum(per), 1.0 / static_cast<double>(n));
}

template <class T>
ad::Var<T> loss_prior(ad::Tape<T>& tape, const Tensor<T>& z_normalized, const LatentPrior<T>& prior,
                      RandomStream& rng) {
  if (z_normalized.cols() != prior.latent_dim()) throw ShapeError("loss_prior: latent dim mismatch");
  const EpsGraphFn<T> eps_hat = [&prior](ad::Tape<T>& tp, ad::Var<T> z_t, std::span<const double> t) {
    return prior.predict_eps(tp, z_t, t);
  };
  return loss_prior(tape, z_normalized, prior.schedule(), prior.config().loss, eps_hat, rng);
}

template <class T>
void train_prior(LatentPrior<T>& prior, const Tensor<T>& z_raw, RandomStream& rng,
                 const std::function<void(const PriorStepMetrics&)>& on_metrics, std::size_t log_every) {
  prior.set_stats(fit_z_stats(z_raw));
  const Tensor<T> z = normalize_z(z_raw, prior.stats());
  const LatentPriorConfig& cfg = prior.config();
  const AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8};
  for (std::size_t step = 1; step <= cfg.total_steps; ++step) {
    std::vector<std::size_t> idx(cfg.batch_size);
    for (std::size_t& i : idx) i = rng.index(z.rows());
    ad::Tape<T> tape;
    const ad::Var<T> loss = loss_prior(tape, z.gather_rows(idx), prior, rng);
    const double value = static_cast<double>(loss.value()[0]);
    if (!std::isfinite(value))
      throw NumericFault("non-finite prior loss at step " + std::to_string(step));
    const ad::Gradients<T> grads = gradients_for(prior.params(), tape.backward(loss));
    const double norm = global_norm(grads);
    adam_step(prior.params(), grads, adam);
    ema_update(prior.params(), cfg.ema_rate);
    if (on_metrics && (step == cfg.total_steps || (log_every && step % log_every == 0)))
      on_metrics({step, value, norm});
  }
}

#define DBAE_INSTANTIATE(T)                                                                       \
  template Tensor<T> normalize_z(const Tensor<T>&, const ZStats&);                                \
  template Tensor<T> denormalize_z(const Tensor<T>&, const ZStats&);                              \
  template Tensor<T> encode_dataset(const ModelBundle<T>&, const Tensor<T>&, RandomStream*,       \
                                    std::size_t);                                                 \
  template ZStats fit_z_stats(const Tensor<T>&, const ModelBundle<T>&, RandomStream*);            \
  template class LatentPrior<T>;                                                                  \
  template ad::Var<T> loss_prior(ad::Tape<T>&, const Tensor<T>&, const LatentPrior<T>&,           \
                                 RandomStream&);                                                  \
  template ad::Var<T> loss_prior(ad::Tape<T>&, const Tensor<T>&, const VpSchedule&, PriorLoss,    \
                                 const EpsGraphFn<T>&, RandomStream&);                            \
  template void train_prior(LatentPrior<T>&, const Tensor<T>&, RandomStream&,                     \
                            const std::function<void(const PriorStepMetrics&)>&, std::size_t);

DBAE_INSTANTIATE(float)
DBAE_INSTANTIATE(double)

}  // namespace dbae
