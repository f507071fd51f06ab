// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>

#include "dbae/model.hpp"
#include "dbae/prior.hpp"

namespace dbae {

enum class SamplerKind { heun_ode, euler_ode, euler_maruyama_sde };

/// Descending nodes t_N = (1 - eps_t) T > ... > t_0 = eps_t T.
struct TimeGrid {
  std::vector<double> times;  // times[0] = t_N

  std::size_t steps() const { return times.size() - 1; }
  static TimeGrid make(const BridgeKernel& kernel, std::size_t steps, GridSpacing spacing);
  /// N uniform intervals over [t_lo, t_hi].
  static TimeGrid between(double t_hi, double t_lo, std::size_t steps);
};

struct SamplerConfig {
  SamplerKind kind = SamplerKind::heun_ode;
  std::size_t steps = 50;
  GridSpacing spacing = GridSpacing::quadratic;
  std::uint64_t seed = 0;
};

/// Network evaluations spent by a procedure.
struct NfeReport {
  std::size_t encoder = 0;
  std::size_t decoder = 0;
  std::size_t score = 0;
  std::size_t prior = 0;

  std::size_t total() const { return encoder + decoder + score + prior; }
};

/// Score of p(x_t | x_T) for a batch at one time.
using ScoreFn = std::function<Tensor<double>(const Tensor<double>& x, double t)>;
/// Generic time derivative dx/dt.
using DriftFn = std::function<Tensor<double>(const Tensor<double>& x, double t)>;

/// f - 1/2 g^2 s + g^2 h (probability-flow form).
Tensor<double> ode_drift(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                         double t, const Tensor<double>& x_end);
/// f - g^2 s + g^2 h.
Tensor<double> sde_drift(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                         double t, const Tensor<double>& x_end);

Tensor<double> euler_step(const DriftFn& drift, const Tensor<double>& x, double t_hi, double t_lo);
/// Explicit trapezoid: Euler predictor, averaged-slope corrector.
Tensor<double> heun_step(const DriftFn& drift, const Tensor<double>& x, double t_hi, double t_lo);

/// One reverse step of the bridge ODE; `kind` is heun_ode or euler_ode.
Tensor<double> reverse_ode_step(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                                double t_hi, double t_lo, const Tensor<double>& x_end,
                                SamplerKind kind = SamplerKind::heun_ode);
/// One Euler-Maruyama step of the reverse bridge SDE, noise g(t_hi) sqrt(t_hi - t_lo).
Tensor<double> reverse_sde_step(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                                double t_hi, double t_lo, const Tensor<double>& x_end, RandomStream& rng);

/// Integrates dx/dt = drift along `grid` (no final jump); returns x at times.back().
Tensor<double> integrate(const DriftFn& drift, Tensor<double> x, const TimeGrid& grid,
                         SamplerKind kind);

/// Time and state at every visited node; path_id = row index.
struct Trajectory {
  std::vector<double> t;
  std::vector<Tensor<double>> x;
};
void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);

/// Reverse pass from x = x_T at t_N down to t_1, then x0 = pred_x0(x, t_1).
/// `pred_x0` is evaluated once at the end; `score` counts toward NFE.
struct ReverseResult {
  Tensor<double> x0;
  std::size_t score_evals = 0;
};
ReverseResult reverse_bridge(const BridgeKernel& kernel, const ScoreFn& score,
                             const std::function<Tensor<double>(const Tensor<double>&, double)>& pred_x0,
                             const Tensor<double>& x_end, const SamplerConfig& cfg, RandomStream* rng,
                             Trajectory* trajectory = nullptr);

template <class T>
struct Endpoint {
  Tensor<T> z;
  Tensor<T> x_end;
  NfeReport nfe;
};

/// z = Enc(x0) (posterior mean for the Gaussian encoder), x_T = Dec(z):
/// one encoder pass, one decoder pass and no score evaluations.
template <class T>
Endpoint<T> infer_endpoint(const ModelBundle<T>& bundle, const Tensor<T>& x0);

template <class T>
struct SampleResult {
  Tensor<T> x0;
  Tensor<T> x_end;
  NfeReport nfe;
};

/// x_T = Dec(z) and the reverse pass conditioned on z (EMA weights).
template <class T>
SampleResult<T> decode_and_reverse(const ModelBundle<T>& bundle, const Tensor<T>& z,
                                   const SamplerConfig& cfg, RandomStream* rng,
                                   Trajectory* trajectory = nullptr);

/// Encode, decode, reverse. The ODE kinds draw nothing from `rng`; the SDE
/// kind requires it.
template <class T>
SampleResult<T> reconstruct(const ModelBundle<T>& bundle, const Tensor<T>& x0, const SamplerConfig& cfg,
                            RandomStream* rng = nullptr, Trajectory* trajectory = nullptr);

/// z ~ prior (DDIM), then decode_and_reverse.
template <class T>
SampleResult<T> generate(const ModelBundle<T>& bundle, const LatentPrior<T>& prior, std::size_t n,
                         const SamplerConfig& cfg, RandomStream& rng, std::size_t latent_steps = 0);

/// Codes for decode_and_reverse drawn from the encoded dataset instead of a
/// prior (rows picked uniformly with replacement).
template <class T>
SampleResult<T> generate_from_codes(const ModelBundle<T>& bundle, const Tensor<T>& codes, std::size_t n,
                                    const SamplerConfig& cfg, RandomStream& rng);

template <class T>
struct Interpolation {
  std::vector<double> lambdas;
  std::vector<Tensor<T>> x_end;  // one decoder pass per lambda
  std::vector<Tensor<T>> x0;
};

/// z^lambda = lambda z_a + (1 - lambda) z_b for row-aligned batches a and b.
template <class T>
Interpolation<T> interpolate(const ModelBundle<T>& bundle, const Tensor<T>& x0_a, const Tensor<T>& x0_b,
                             const std::vector<double>& lambdas, const SamplerConfig& cfg,
                             RandomStream* rng = nullptr);

/// z + strength * direction, decoded and reversed.
template <class T>
SampleResult<T> manipulate(const ModelBundle<T>& bundle, const Tensor<T>& x0, const Tensor<T>& direction,
                           double strength, const SamplerConfig& cfg, RandomStream* rng = nullptr);

std::string to_string(SamplerKind kind);
SamplerKind sampler_kind_from_string(const std::string& s);

}  // namespace dbae
