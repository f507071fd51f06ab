// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <span>

#include "dbae/bridge.hpp"
#include "dbae/nn.hpp"

namespace dbae {

enum class EncoderMode { deterministic, gaussian };

inline std::string to_string(EncoderMode m) { return m == EncoderMode::gaussian ? "gaussian" : "deterministic"; }
inline EncoderMode encoder_mode_from_string(const std::string& s) {
  if (s == "deterministic") return EncoderMode::deterministic;
  if (s == "gaussian") return EncoderMode::gaussian;
  throw ConfigError("unknown encoder mode '" + s + "'");
}

struct EncoderConfig {
  std::size_t data_dim = 2;
  std::size_t latent_dim = 2;
  std::size_t hidden = 128;
  std::size_t depth = 2;  // hidden layers
  EncoderMode mode = EncoderMode::deterministic;
};

struct DecoderConfig {
  std::size_t latent_dim = 2;
  std::size_t data_dim = 2;
  std::size_t hidden = 128;
  std::size_t depth = 2;
};

struct ScoreNetConfig {
  std::size_t data_dim = 2;
  std::size_t latent_dim = 2;
  std::size_t hidden = 256;
  std::size_t depth = 3;
  std::size_t time_dim = 16;
  double time_max_freq = 100.0;
  bool use_z_condition = true;
};

struct ModelConfig {
  EncoderConfig encoder;
  DecoderConfig decoder;
  ScoreNetConfig score;

  /// Consistent dims for data dimension d and latent dimension l.
  static ModelConfig with_dims(std::size_t data_dim, std::size_t latent_dim);
  /// Throws ConfigError when the three sub-configs disagree.
  void validate() const;
};

/// Lower bound on the Gaussian encoder's standard deviation.
inline constexpr double kMinEncoderSigma = 1e-4;
/// Upper bound on the Gaussian encoder's standard deviation.
inline constexpr double kMaxEncoderSigma = 10.0;

template <class T>
struct EncodeVars {
  ad::Var<T> z;
  std::optional<ad::Var<T>> mean;
  std::optional<ad::Var<T>> log_sigma;
};

template <class T>
struct Encoding {
  Tensor<T> z;
  std::optional<Tensor<T>> mean;
  std::optional<Tensor<T>> log_sigma;
};

/// Encoder Enc: R^d -> R^l, decoder Dec: R^l -> R^d and the pred-x network
/// x0(x_t, t, x_T [, z]), over a shared bridge kernel.
///
/// The decoder's only input is z, so the endpoint x_T carries no information
/// about x0 beyond what z holds.
template <class T>
class ModelBundle {
 public:
  ModelBundle(ModelConfig config, BridgeKernel bridge, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  const BridgeKernel& bridge() const { return bridge_; }
  EncoderMode encoder_mode() const { return config_.encoder.mode; }
  std::size_t data_dim() const { return config_.encoder.data_dim; }
  std::size_t latent_dim() const { return config_.encoder.latent_dim; }

  ParamStore<T>& encoder_params() { return enc_params_; }
  ParamStore<T>& decoder_params() { return dec_params_; }
  ParamStore<T>& score_params() { return score_params_; }
  const ParamStore<T>& encoder_params() const { return enc_params_; }
  const ParamStore<T>& decoder_params() const { return dec_params_; }
  const ParamStore<T>& score_params() const { return score_params_; }
  std::array<ParamStore<T>*, 3> stores() { return {&enc_params_, &dec_params_, &score_params_}; }
  std::array<const ParamStore<T>*, 3> stores() const {
    return {&enc_params_, &dec_params_, &score_params_};
  }

  // Graph-level forward passes, recorded on `tape`.

  /// Gaussian mode requires `noise` (rows x l standard normals).
  EncodeVars<T> encode(ad::Tape<T>& tape, ad::Var<T> x0, const Tensor<T>* noise,
                       Weights w = Weights::live) const;
  ad::Var<T> decode(ad::Tape<T>& tape, ad::Var<T> z, Weights w = Weights::live) const;
  /// `t` holds one time per row. `z` is required iff use_z_condition.
  ad::Var<T> predict_x0(ad::Tape<T>& tape, ad::Var<T> x_t, std::span<const double> t,
                        ad::Var<T> x_end, std::optional<ad::Var<T>> z,
                        Weights w = Weights::live) const;

  // Tensor-level convenience wrappers (no gradients).

  /// Deterministic mode ignores `rng`; Gaussian mode draws z = mean + sigma eps
  /// and throws ContractError when `rng` is null.
  Encoding<T> encode(const Tensor<T>& x0, RandomStream* rng, Weights w = Weights::live) const;
  /// Gaussian-mode posterior mean (deterministic mode: the code itself).
  Encoding<T> encode_mean(const Tensor<T>& x0, Weights w = Weights::live) const;
  /// Gaussian mode with explicit noise; a zero tensor gives z = mean.
  Encoding<T> encode_with_noise(const Tensor<T>& x0, const Tensor<T>& noise,
                                Weights w = Weights::live) const;
  Tensor<T> decode(const Tensor<T>& z, Weights w = Weights::live) const;
  Tensor<T> predict_x0(const Tensor<T>& x_t, double t, const Tensor<T>& x_end, const Tensor<T>* z,
                       Weights w = Weights::live) const;
  /// score = score_from_x0(x_t, t, x_T, predict_x0(...)).
  Tensor<T> score(const Tensor<T>& x_t, double t, const Tensor<T>& x_end, const Tensor<T>* z,
                  Weights w = Weights::live) const;

  /// Parameter-for-parameter copy in another precision.
  template <class U>
  ModelBundle<U> cast() const;

 private:
  template <class U>
  friend class ModelBundle;

  ModelConfig config_;
  BridgeKernel bridge_;
  Mlp<T> encoder_, decoder_, score_net_;
  ParamStore<T> enc_params_, dec_params_, score_params_;
};

template <class T>
template <class U>
ModelBundle<U> ModelBundle<T>::cast() const {
  ModelBundle<U> out(config_, bridge_, 0);
  const std::array<const ParamStore<T>*, 3> src = stores();
  const std::array<ParamStore<U>*, 3> dst = out.stores();
  for (std::size_t k = 0; k < 3; ++k) {
    for (const std::string& name : src[k]->names()) {
      const auto& e = src[k]->entry(name);
      auto& d = dst[k]->entry(name);
      d.live = e.live.template cast<U>();
      d.ema = e.ema.template cast<U>();
      d.first_moment = e.first_moment.template cast<U>();
      d.second_moment = e.second_moment.template cast<U>();
    }
    dst[k]->set_step(src[k]->step());
  }
  return out;
}

}  // namespace dbae
