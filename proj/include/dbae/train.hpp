// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <string>

#include "dbae/model.hpp"

namespace dbae {

/// score_matching: 1/2 g^2 |s - grad log q(x_t | x0, x_T)|^2 with s derived
///   from the pred-x network.
/// x0_weighted: 1/2 lambda(t) |x0(s) - x0|^2 where x0(s) maps the same score
///   back through the affine x0 coefficients; equal to score_matching.
/// x0_simple: 1/2 |x0_hat - x0|^2, unit weight (the training default).
enum class LossForm { score_matching, x0_weighted, x0_simple };

struct TrainConfig {
  std::size_t batch_size = 128;
  double lr = 1e-4;
  double ema_rate = 0.9999;
  std::size_t total_steps = 5000;
  LossForm loss_form = LossForm::x0_simple;
  double tc_weight = 0.0;
  std::size_t log_every = 50;
  std::size_t checkpoint_every = 0;  // 0: only at the end
};

/// Random inputs of one L_AE evaluation, drawn up front so several loss
/// forms can be evaluated on identical draws.
template <class T>
struct AeDraws {
  std::vector<double> t;                // one time per row
  Tensor<T> bridge_noise;               // rows x d
  std::optional<Tensor<T>> encoder_noise;  // rows x l, Gaussian encoder only
};

/// t ~ U[eps_t T, (1 - eps_t) T] per row, standard normal noises.
template <class T>
AeDraws<T> draw_ae(const ModelBundle<T>& bundle, std::size_t rows, RandomStream& rng);

template <class T>
struct AeLossVars {
  ad::Var<T> per_sample;  // rows x 1
  ad::Var<T> loss;        // 1 x 1, batch mean
  EncodeVars<T> encoding;
};

/// L_AE per sample for a batch of x0 on `tape` (Algorithm 1 body).
template <class T>
AeLossVars<T> loss_ae_terms(ad::Tape<T>& tape, const Tensor<T>& batch, const ModelBundle<T>& bundle,
                            const AeDraws<T>& draws, LossForm form);

template <class T>
ad::Var<T> loss_ae(ad::Tape<T>& tape, const Tensor<T>& batch, const ModelBundle<T>& bundle,
                   RandomStream& rng, LossForm form);

/// Total correlation KL(q(z) || prod_k q(z_k)) estimated on a minibatch of
/// Gaussian posteriors N(mean_j, exp(log_sigma_j)^2) and their samples z_i.
///
/// The aggregate density at z_i is an importance-weighted mixture over the
/// batch: weight 1/N on the sample's own posterior, (N - M)/(N M) on one other
/// and 1/M on the rest (M = batch - 1, N = dataset_size). Weights sum to one,
/// so the estimate is calibrated as N and the batch grow.
template <class T>
ad::Var<T> loss_tc(ad::Tape<T>& tape, ad::Var<T> mean, ad::Var<T> log_sigma, ad::Var<T> z,
                   std::size_t dataset_size);

struct StepMetrics {
  std::uint64_t step = 0;
  double loss_ae = 0;
  double loss_tc = 0;
  double grad_norm = 0;
  double wall_ms = 0;
};

/// Minibatch of `batch_size` rows drawn uniformly with replacement.
template <class T>
Tensor<T> sample_batch(const Tensor<T>& dataset, std::size_t batch_size, RandomStream& rng);

/// One Adam step on L_AE + tc_weight * TC over all three networks, then EMA.
template <class T>
StepMetrics train_step(ModelBundle<T>& bundle, const Tensor<T>& batch, const TrainConfig& cfg,
                       RandomStream& rng, std::size_t dataset_size);

struct TrainCallbacks {
  /// Called for every metrics row (every log_every steps and the last step).
  std::function<void(const StepMetrics&)> on_metrics;
  /// Called every checkpoint_every steps and at the end, after the update of
  /// that step.
  std::function<void(std::uint64_t step)> on_checkpoint;
};

/// Runs steps (start_step, stop_step] of a run, drawing everything from `rng`.
/// Resuming with the bundle and rng saved at a checkpoint reproduces the
/// uninterrupted run.
template <class T>
void train_loop(ModelBundle<T>& bundle, const Tensor<T>& dataset, const TrainConfig& cfg,
                RandomStream& rng, std::uint64_t start_step, std::uint64_t stop_step,
                const TrainCallbacks& callbacks = {});

std::string to_string(LossForm form);
LossForm loss_form_from_string(const std::string& s);

}  // namespace dbae
