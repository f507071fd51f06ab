// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/sample.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "dbae/log.hpp"

namespace dbae {

std::string to_string(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::heun_ode: return "heun_ode";
    case SamplerKind::euler_ode: return "euler_ode";
    case SamplerKind::euler_maruyama_sde: return "euler_maruyama_sde";
  }
  return "?";
}

SamplerKind sampler_kind_from_string(const std::string& s) {
  if (s == "heun_ode") return SamplerKind::heun_ode;
  if (s == "euler_ode") return SamplerKind::euler_ode;
  if (s == "euler_maruyama_sde") return SamplerKind::euler_maruyama_sde;
  throw ConfigError("unknown sampler kind '" + s + "'");
}

TimeGrid TimeGrid::make(const BridgeKernel& kernel, std::size_t steps, GridSpacing spacing) {
  if (steps == 0) throw ContractError("TimeGrid: steps must be >= 1");
  const double lo = kernel.t_min(), hi = kernel.t_max();
  TimeGrid g;
  g.times.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    const double u = static_cast<double>(steps - i) / static_cast<double>(steps);
    g.times[i] = lo + (hi - lo) * (spacing == GridSpacing::quadratic ? u * u : u);
  }
  g.times.front() = hi;
  g.times.back() = lo;
  return g;
}

TimeGrid TimeGrid::between(double t_hi, double t_lo, std::size_t steps) {
  if (steps == 0 || !(t_lo < t_hi)) throw ContractError("TimeGrid::between: need steps >= 1 and t_lo < t_hi");
  TimeGrid g;
  g.times.resize(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i)
    g.times[i] = t_hi + (t_lo - t_hi) * static_cast<double>(i) / static_cast<double>(steps);
  g.times.back() = t_lo;
  return g;
}

namespace {

Tensor<double> bridge_drift(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                            double t, const Tensor<double>& x_end, double score_weight) {
  const double g2 = kernel.schedule().beta(t);
  const Tensor<double> s = score(x, t);
  const Tensor<double> h = kernel.h_transform(x, t, x_end);
  require_same_shape(s, x, "bridge drift");
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = -0.5 * g2 * x[i] - score_weight * g2 * s[i] + g2 * h[i];
  return out;
}

}  // namespace

Tensor<double> ode_drift(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                         double t, const Tensor<double>& x_end) {
  return bridge_drift(kernel, score, x, t, x_end, 0.5);
}

Tensor<double> sde_drift(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                         double t, const Tensor<double>& x_end) {
  return bridge_drift(kernel, score, x, t, x_end, 1.0);
}

Tensor<double> euler_step(const DriftFn& drift, const Tensor<double>& x, double t_hi, double t_lo) {
  return axpby(1.0, x, t_lo - t_hi, drift(x, t_hi));
}

Tensor<double> heun_step(const DriftFn& drift, const Tensor<double>& x, double t_hi, double t_lo) {
  const double dt = t_lo - t_hi;
  const Tensor<double> d1 = drift(x, t_hi);
  const Tensor<double> pred = axpby(1.0, x, dt, d1);
  const Tensor<double> d2 = drift(pred, t_lo);
  Tensor<double> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + 0.5 * dt * (d1[i] + d2[i]);
  return out;
}

Tensor<double> reverse_ode_step(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                                double t_hi, double t_lo, const Tensor<double>& x_end, SamplerKind kind) {
  if (!(t_lo < t_hi)) throw ContractError("reverse_ode_step: need t_lo < t_hi");
  const DriftFn drift = [&](const Tensor<double>& y, double t) { return ode_drift(kernel, score, y, t, x_end); };
  switch (kind) {
    case SamplerKind::heun_ode: return heun_step(drift, x, t_hi, t_lo);
    case SamplerKind::euler_ode: return euler_step(drift, x, t_hi, t_lo);
    case SamplerKind::euler_maruyama_sde: break;
  }
  throw ContractError("reverse_ode_step: SDE kind given");
}

Tensor<double> reverse_sde_step(const BridgeKernel& kernel, const ScoreFn& score, const Tensor<double>& x,
                                double t_hi, double t_lo, const Tensor<double>& x_end, RandomStream& rng) {
  if (!(t_lo < t_hi)) throw ContractError("reverse_sde_step: need t_lo < t_hi");
  const double dt = t_lo - t_hi;
  const double noise = kernel.schedule().g(t_hi) * std::sqrt(-dt);
  Tensor<double> out = axpby(1.0, x, dt, sde_drift(kernel, score, x, t_hi, x_end));
  for (double& v : out.values()) v += noise * rng.normal();
  return out;
}

Tensor<double> integrate(const DriftFn& drift, Tensor<double> x, const TimeGrid& grid, SamplerKind kind) {
  if (kind == SamplerKind::euler_maruyama_sde) throw ContractError("integrate: ODE kinds only");
  for (std::size_t i = 0; i + 1 < grid.times.size(); ++i) {
    x = kind == SamplerKind::heun_ode ? heun_step(drift, x, grid.times[i], grid.times[i + 1])
                                      : euler_step(drift, x, grid.times[i], grid.times[i + 1]);
  }
  return x;
}

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path + " for writing");
  if (trajectory.x.empty()) return;
  const std::size_t d = trajectory.x.front().cols();
  out << "path_id,t";
  for (std::size_t k = 0; k < d; ++k) out << ",x" << k;
  out << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  const std::size_t n = trajectory.x.front().rows();
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t s = 0; s < trajectory.x.size(); ++s) {
      out << p << ',' << trajectory.t[s];
      for (std::size_t k = 0; k < d; ++k) out << ',' << trajectory.x[s](p, k);
      out << '\n';
    }
  }
}

ReverseResult reverse_bridge(const BridgeKernel& kernel, const ScoreFn& score,
                             const std::function<Tensor<double>(const Tensor<double>&, double)>& pred_x0,
                             const Tensor<double>& x_end, const SamplerConfig& cfg, RandomStream* rng,
                             Trajectory* trajectory) {
  const bool sde = cfg.kind == SamplerKind::euler_maruyama_sde;
  if (sde && rng == nullptr) throw ContractError("reverse_bridge: the SDE sampler needs a random stream");
  const TimeGrid grid = TimeGrid::make(kernel, cfg.steps, cfg.spacing);
  ReverseResult r;
  Tensor<double> x = x_end;
  auto record = [&](double t, const Tensor<double>& v) {
    if (trajectory) trajectory->t.push_back(t), trajectory->x.push_back(v);
  };
  record(grid.times[0], x);
  const std::size_t n = cfg.steps;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double hi = grid.times[i], lo = grid.times[i + 1];
    if (sde) {
      x = reverse_sde_step(kernel, score, x, hi, lo, x_end, *rng);
      r.score_evals += 1;
    } else {
      x = reverse_ode_step(kernel, score, x, hi, lo, x_end, cfg.kind);
      r.score_evals += cfg.kind == SamplerKind::heun_ode ? 2 : 1;
    }
    record(lo, x);
  }
  r.x0 = pred_x0(x, grid.times[n - 1]);
  r.score_evals += 1;
  record(0.0, r.x0);
  return r;
}

template <class T>
Endpoint<T> infer_endpoint(const ModelBundle<T>& bundle, const Tensor<T>& x0) {
  Endpoint<T> e;
  e.z = bundle.encode_mean(x0.as_matrix(), Weights::ema).z;
  e.x_end = bundle.decode(e.z, Weights::ema);
  e.nfe.encoder = 1;
  e.nfe.decoder = 1;
  return e;
}

template <class T>
SampleResult<T> decode_and_reverse(const ModelBundle<T>& bundle, const Tensor<T>& z, const SamplerConfig& cfg,
                                   RandomStream* rng, Trajectory* trajectory) {
  const Tensor<T> zm = z.as_matrix();
  const Tensor<T> x_end = bundle.decode(zm, Weights::ema);
  const Tensor<T>* cond = bundle.config().score.use_z_condition ? &zm : nullptr;
  const ScoreFn score = [&](const Tensor<double>& x, double t) {
    return bundle.score(x.cast<T>(), t, x_end, cond, Weights::ema).template cast<double>();
  };
  const auto pred = [&](const Tensor<double>& x, double t) {
    return bundle.predict_x0(x.cast<T>(), t, x_end, cond, Weights::ema).template cast<double>();
  };
  const ReverseResult r =
      reverse_bridge(bundle.bridge(), score, pred, x_end.template cast<double>(), cfg, rng, trajectory);
  SampleResult<T> out;
  out.x0 = r.x0.template cast<T>();
  out.x_end = x_end;
  out.nfe.decoder = 1;
  out.nfe.score = r.score_evals;
  return out;
}

template <class T>
SampleResult<T> reconstruct(const ModelBundle<T>& bundle, const Tensor<T>& x0, const SamplerConfig& cfg,
                            RandomStream* rng, Trajectory* trajectory) {
  const Tensor<T> z = bundle.encode_mean(x0.as_matrix(), Weights::ema).z;
  SampleResult<T> out = decode_and_reverse(bundle, z, cfg, rng, trajectory);
  out.nfe.encoder = 1;
  return out;
}

template <class T>
SampleResult<T> generate(const ModelBundle<T>& bundle, const LatentPrior<T>& prior, std::size_t n,
                         const SamplerConfig& cfg, RandomStream& rng, std::size_t latent_steps) {
  if (prior.latent_dim() != bundle.latent_dim()) throw ShapeError("generate: prior latent dim mismatch");
  const std::size_t steps = latent_steps ? latent_steps : prior.config().sample_steps;
  const Tensor<T> z = prior.sample(n, rng, steps);
  SampleResult<T> out = decode_and_reverse(bundle, z, cfg, &rng);
  out.nfe.prior = steps;
  return out;
}

template <class T>
SampleResult<T> generate_from_codes(const ModelBundle<T>& bundle, const Tensor<T>& codes, std::size_t n,
                                    const SamplerConfig& cfg, RandomStream& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t& i : idx) i = rng.index(codes.rows());
  return decode_and_reverse(bundle, codes.as_matrix().gather_rows(idx), cfg, &rng);
}

template <class T>
Interpolation<T> interpolate(const ModelBundle<T>& bundle, const Tensor<T>& x0_a, const Tensor<T>& x0_b,
                             const std::vector<double>& lambdas, const SamplerConfig& cfg, RandomStream* rng) {
  const Tensor<T> za = bundle.encode_mean(x0_a.as_matrix(), Weights::ema).z;
  const Tensor<T> zb = bundle.encode_mean(x0_b.as_matrix(), Weights::ema).z;
  require_same_shape(za, zb, "interpolate");
  Interpolation<T> out;
  out.lambdas = lambdas;
  for (double lam : lambdas) {
    if (lam < 0.0 || lam > 1.0) log::warn("interpolate: lambda " + std::to_string(lam) + " extrapolates");
    const Tensor<T> z = axpby(lam, za, 1.0 - lam, zb);
    SampleResult<T> r = decode_and_reverse(bundle, z, cfg, rng);
    out.x_end.push_back(std::move(r.x_end));
    out.x0.push_back(std::move(r.x0));
  }
  return out;
}

template <class T>
SampleResult<T> manipulate(const ModelBundle<T>& bundle, const Tensor<T>& x0, const Tensor<T>& direction,
                           double strength, const SamplerConfig& cfg, RandomStream* rng) {
  const Tensor<T> z = bundle.encode_mean(x0.as_matrix(), Weights::ema).z;
  if (direction.size() != bundle.latent_dim()) throw ShapeError("manipulate: direction must have latent dim");
  Tensor<T> shifted = z;
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t k = 0; k < z.cols(); ++k)
      shifted(i, k) = static_cast<T>(static_cast<double>(z(i, k)) + strength * static_cast<double>(direction[k]));
  SampleResult<T> out = decode_and_reverse(bundle, shifted, cfg, rng);
  out.nfe.encoder = 1;
  return out;
}

#define DBAE_INSTANTIATE(T)                                                                             \
  template Endpoint<T> infer_endpoint(const ModelBundle<T>&, const Tensor<T>&);                         \
  template SampleResult<T> decode_and_reverse(const ModelBundle<T>&, const Tensor<T>&,                  \
                                              const SamplerConfig&, RandomStream*, Trajectory*);        \
  template SampleResult<T> reconstruct(const ModelBundle<T>&, const Tensor<T>&, const SamplerConfig&,   \
                                       RandomStream*, Trajectory*);                                     \
  template SampleResult<T> generate(const ModelBundle<T>&, const LatentPrior<T>&, std::size_t,          \
                                    const SamplerConfig&, RandomStream&, std::size_t);                  \
  template SampleResult<T> generate_from_codes(const ModelBundle<T>&, const Tensor<T>&, std::size_t,    \
                                               const SamplerConfig&, RandomStream&);                    \
  template Interpolation<T> interpolate(const ModelBundle<T>&, const Tensor<T>&, const Tensor<T>&,      \
                                        const std::vector<double>&, const SamplerConfig&, RandomStream*); \
  template SampleResult<T> manipulate(const ModelBundle<T>&, const Tensor<T>&, const Tensor<T>&, double, \
                                      const SamplerConfig&, RandomStream*);

DBAE_INSTANTIATE(float)
DBAE_INSTANTIATE(double)

}  // namespace dbae
