// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/model.hpp"

#include <cmath>

#include "dbae/log.hpp"

namespace dbae {

namespace {

std::vector<std::size_t> mlp_widths(std::size_t in, std::size_t hidden, std::size_t depth,
                                    std::size_t out) {
  std::vector<std::size_t> w{in};
  for (std::size_t i = 0; i < depth; ++i) w.push_back(hidden);
  w.push_back(out);
  return w;
}

std::size_t score_input_dim(const ScoreNetConfig& c) {
  return 2 * c.data_dim + c.time_dim + (c.use_z_condition ? c.latent_dim : 0);
}

}  // namespace

ModelConfig ModelConfig::with_dims(std::size_t data_dim, std::size_t latent_dim) {
  ModelConfig c;
  c.encoder.data_dim = c.decoder.data_dim = c.score.data_dim = data_dim;
  c.encoder.latent_dim = c.decoder.latent_dim = c.score.latent_dim = latent_dim;
  return c;
}

void ModelConfig::validate() const {
  if (encoder.data_dim == 0 || encoder.latent_dim == 0) throw ConfigError("model: dims must be positive");
  if (decoder.data_dim != encoder.data_dim || score.data_dim != encoder.data_dim)
    throw ConfigError("model: data_dim differs between encoder, decoder and score network");
  if (decoder.latent_dim != encoder.latent_dim || score.latent_dim != encoder.latent_dim)
    throw ConfigError("model: latent_dim differs between encoder, decoder and score network");
  if (encoder.latent_dim > encoder.data_dim)
    throw ConfigError("model: latent_dim must not exceed data_dim");
  if (score.time_dim == 0 || score.time_dim % 2 != 0) throw ConfigError("model: time_dim must be even");
  if (encoder.hidden == 0 || decoder.hidden == 0 || score.hidden == 0)
    throw ConfigError("model: hidden widths must be positive");
}

template <class T>
ModelBundle<T>::ModelBundle(ModelConfig config, BridgeKernel bridge, std::uint64_t init_seed)
    : config_(std::move(config)), bridge_(std::move(bridge)) {
  config_.validate();
  const EncoderConfig& e = config_.encoder;
  const DecoderConfig& d = config_.decoder;
  const ScoreNetConfig& s = config_.score;
  const std::size_t enc_out = e.mode == EncoderMode::gaussian ? 2 * e.latent_dim : e.latent_dim;
  encoder_ = Mlp<T>("enc", mlp_widths(e.data_dim, e.hidden, e.depth, enc_out));
  decoder_ = Mlp<T>("dec", mlp_widths(d.latent_dim, d.hidden, d.depth, d.data_dim));
  score_net_ = Mlp<T>("score", mlp_widths(score_input_dim(s), s.hidden, s.depth, s.data_dim));
  RandomStream rng(init_seed);
  RandomStream enc_rng = rng.substream(1), dec_rng = rng.substream(2), score_rng = rng.substream(3);
  encoder_.init(enc_params_, enc_rng);
  decoder_.init(dec_params_, dec_rng);
  score_net_.init(score_params_, score_rng);
}

template <class T>
EncodeVars<T> ModelBundle<T>::encode(ad::Tape<T>& tape, ad::Var<T> x0, const Tensor<T>* noise,
                                     Weights w) const {
  const ad::Var<T> out = encoder_.forward(tape, enc_params_, x0, w);
  const std::size_t l = config_.encoder.latent_dim;
  if (config_.encoder.mode == EncoderMode::deterministic) return {out, std::nullopt, std::nullopt};
  if (noise == nullptr) throw ContractError("encode: gaussian encoder needs a noise source");
  if (noise->rows() != x0.rows() || noise->cols() != l) throw ShapeError("encode: noise must be (rows x l)");
  const ad::Var<T> mean = ad::slice_cols(out, 0, l);
  const ad::Var<T> raw = ad::slice_cols(out, l, l);
  // sigma = min_sigma + softplus(raw) - softplus(raw - span): a smooth clamp into (min, max).
  const double span = kMaxEncoderSigma - kMinEncoderSigma;
  const ad::Var<T> sigma =
      ad::add_scalar(ad::sub(ad::softplus(raw), ad::softplus(ad::add_scalar(raw, -span))), kMinEncoderSigma);
  const ad::Var<T> z = ad::add(mean, ad::mul(sigma, tape.constant(*noise)));
  return {z, mean, ad::log(sigma)};
}

template <class T>
ad::Var<T> ModelBundle<T>::decode(ad::Tape<T>& tape, ad::Var<T> z, Weights w) const {
  return decoder_.forward(tape, dec_params_, z, w);
}

template <class T>
ad::Var<T> ModelBundle<T>::predict_x0(ad::Tape<T>& tape, ad::Var<T> x_t, std::span<const double> t,
                                      ad::Var<T> x_end, std::optional<ad::Var<T>> z, Weights w) const {
  const ScoreNetConfig& s = config_.score;
  if (t.size() != x_t.rows()) throw ShapeError("predict_x0: need one time per row");
  if (x_t.cols() != s.data_dim || x_end.cols() != s.data_dim || x_end.rows() != x_t.rows())
    throw ShapeError("predict_x0: x_t and x_T must be (rows x d)");
  std::vector<double> t_scaled(t.begin(), t.end());
  for (double& v : t_scaled) v /= bridge_.schedule().t_end();
  std::vector<ad::Var<T>> inputs{x_t, x_end, tape.constant(time_embed<T>(t_scaled, s.time_dim, s.time_max_freq))};
  if (s.use_z_condition) {
    if (!z) throw ContractError("predict_x0: score network is conditioned on z but none was given");
    inputs.push_back(*z);
  }
  return score_net_.forward(tape, score_params_, ad::concat_cols(inputs), w);
}

template <class T>
Encoding<T> ModelBundle<T>::encode(const Tensor<T>& x0, RandomStream* rng, Weights w) const {
  if (config_.encoder.mode == EncoderMode::deterministic) return encode_mean(x0, w);
  if (rng == nullptr) throw ContractError("encode: gaussian encoder requires a random stream");
  Tensor<T> noise = Tensor<T>::matrix(x0.rows(), config_.encoder.latent_dim);
  for (T& v : noise.values()) v = static_cast<T>(rng->normal());
  return encode_with_noise(x0, noise, w);
}

template <class T>
Encoding<T> ModelBundle<T>::encode_mean(const Tensor<T>& x0, Weights w) const {
  const Tensor<T> zeros = Tensor<T>::matrix(x0.rows(), config_.encoder.latent_dim);
  return encode_with_noise(x0, zeros, w);
}

template <class T>
Encoding<T> ModelBundle<T>::encode_with_noise(const Tensor<T>& x0, const Tensor<T>& noise, Weights w) const {
  ad::Tape<T> tape(false);
  const EncodeVars<T> v = encode(tape, tape.constant(x0.as_matrix()), &noise, w);
  Encoding<T> out{v.z.value(), std::nullopt, std::nullopt};
  if (v.mean) out.mean = v.mean->value();
  if (v.log_sigma) out.log_sigma = v.log_sigma->value();
  return out;
}

template <class T>
Tensor<T> ModelBundle<T>::decode(const Tensor<T>& z, Weights w) const {
  ad::Tape<T> tape(false);
  return decode(tape, tape.constant(z.as_matrix()), w).value();
}

template <class T>
Tensor<T> ModelBundle<T>::predict_x0(const Tensor<T>& x_t, double t, const Tensor<T>& x_end,
                                     const Tensor<T>* z, Weights w) const {
  ad::Tape<T> tape(false);
  const std::vector<double> times(x_t.rows(), t);
  std::optional<ad::Var<T>> zv;
  if (z != nullptr) zv = tape.constant(z->as_matrix());
  return predict_x0(tape, tape.constant(x_t.as_matrix()), times, tape.constant(x_end.as_matrix()), zv, w).value();
}

template <class T>
Tensor<T> ModelBundle<T>::score(const Tensor<T>& x_t, double t, const Tensor<T>& x_end,
                                const Tensor<T>* z, Weights w) const {
  const Tensor<T> x0_hat = predict_x0(x_t, t, x_end, z, w);
  return bridge_.score_from_x0(x_t.as_matrix(), t, x_end.as_matrix(), x0_hat);
}

template class ModelBundle<float>;
template class ModelBundle<double>;

}  // namespace dbae
