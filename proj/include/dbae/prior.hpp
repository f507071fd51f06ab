// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "dbae/model.hpp"
#include "dbae/schedule.hpp"

namespace dbae {

/// Per-dimension affine normalization of latent codes.
struct ZStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t dim() const { return mean.size(); }
  bool empty() const { return mean.empty(); }
  friend bool operator==(const ZStats&, const ZStats&) = default;
};

/// Throws DegenerateLatentError if a dimension has zero spread.
ZStats fit_z_stats(const Tensor<double>& z);
template <class T>
ZStats fit_z_stats(const Tensor<T>& z) {
  return fit_z_stats(z.template cast<double>());
}

template <class T>
Tensor<T> normalize_z(const Tensor<T>& z, const ZStats& stats);
template <class T>
Tensor<T> denormalize_z(const Tensor<T>& z, const ZStats& stats);

/// Codes of a dataset under the frozen encoder (EMA weights). The Gaussian
/// encoder draws one posterior sample per row from `rng`.
template <class T>
Tensor<T> encode_dataset(const ModelBundle<T>& bundle, const Tensor<T>& dataset, RandomStream* rng,
                         std::size_t chunk = 1024);

/// Codes under the frozen encoder followed by fit_z_stats.
template <class T>
ZStats fit_z_stats(const Tensor<T>& dataset, const ModelBundle<T>& bundle, RandomStream* rng);

enum class PriorLoss { l1, l2 };

struct LatentPriorConfig {
  std::size_t hidden = 256;
  std::size_t depth = 3;
  std::size_t time_dim = 16;
  double beta = 0.008;
  /// Discrete diffusion steps; the constant-beta process runs on [0, steps].
  std::size_t steps = 1000;
  PriorLoss loss = PriorLoss::l2;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  double ema_rate = 0.999;
  std::size_t total_steps = 3000;
  std::size_t sample_steps = 100;
  GridSpacing sample_spacing = GridSpacing::uniform;
};

/// eps_hat(z_t, t) for a batch at a shared time.
using EpsFn = std::function<Tensor<double>(const Tensor<double>& z_t, double t)>;

/// Deterministic DDIM over `steps` intervals from t_end to 0, starting from
/// standard normal draws of `rng`. Returns normalized codes.
Tensor<double> ddim_sample(const VpSchedule& schedule, const EpsFn& eps, std::size_t n,
                           std::size_t dim, std::size_t steps, RandomStream& rng,
                           GridSpacing spacing = GridSpacing::uniform);
/// Same map from given initial codes (no randomness).
Tensor<double> ddim_map(const VpSchedule& schedule, const EpsFn& eps, Tensor<double> z,
                        std::size_t steps, GridSpacing spacing = GridSpacing::uniform);

/// Latent diffusion prior p(z) fitted to encoder codes in normalized space.
template <class T>
class LatentPrior {
 public:
  LatentPrior(LatentPriorConfig config, std::size_t latent_dim, std::uint64_t init_seed);

  const LatentPriorConfig& config() const { return config_; }
  const VpSchedule& schedule() const { return schedule_; }
  std::size_t latent_dim() const { return latent_dim_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }
  const ZStats& stats() const { return stats_; }
  void set_stats(ZStats stats);

  ad::Var<T> predict_eps(ad::Tape<T>& tape, ad::Var<T> z_t, std::span<const double> t,
                         Weights w = Weights::live) const;
  Tensor<T> predict_eps(const Tensor<T>& z_t, double t, Weights w = Weights::ema) const;

  /// DDIM samples mapped back to encoder scale with the stored stats.
  /// Throws ContractError without stats.
  Tensor<T> sample(std::size_t n, RandomStream& rng, std::size_t steps = 0) const;

 private:
  LatentPriorConfig config_;
  VpSchedule schedule_;
  std::size_t latent_dim_;
  Mlp<T> net_;
  ParamStore<T> params_;
  ZStats stats_;
};

/// Denoising loss on normalized codes: t ~ U(0, t_end], z_t = alpha z + sigma eps,
/// residual |eps_hat - eps| in L1 or squared L2, averaged over rows and summed
/// over dims. Warns when the batch is far from unit scale.
template <class T>
ad::Var<T> loss_prior(ad::Tape<T>& tape, const Tensor<T>& z_normalized, const LatentPrior<T>& prior,
                      RandomStream& rng);

/// eps_hat over a batch with one time per row, recorded on a tape.
template <class T>
using EpsGraphFn = std::function<ad::Var<T>(ad::Tape<T>&, ad::Var<T> z_t, std::span<const double> t)>;

/// Same loss for an arbitrary predictor on `schedule`.
template <class T>
ad::Var<T> loss_prior(ad::Tape<T>& tape, const Tensor<T>& z_normalized, const VpSchedule& schedule,
                      PriorLoss loss, const EpsGraphFn<T>& eps_hat, RandomStream& rng);

struct PriorStepMetrics {
  std::uint64_t step = 0;
  double loss = 0;
  double grad_norm = 0;
};

/// Fits stats on `z_raw`, then trains the prior on the normalized codes.
template <class T>
void train_prior(LatentPrior<T>& prior, const Tensor<T>& z_raw, RandomStream& rng,
                 const std::function<void(const PriorStepMetrics&)>& on_metrics = {},
                 std::size_t log_every = 100);

std::string to_string(PriorLoss loss);
PriorLoss prior_loss_from_string(const std::string& s);

}  // namespace dbae
