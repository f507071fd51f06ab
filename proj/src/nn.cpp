// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/nn.hpp"

#include <cmath>
#include <cstring>

namespace dbae {

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

template <class T>
void ParamStore<T>::add(const std::string& name, Tensor<T> value) {
  if (contains(name)) throw ContractError("ParamStore: duplicate parameter '" + name + "'");
  Entry e;
  e.ema = value;
  e.first_moment = Tensor<T>(value.shape(), T(0));
  e.second_moment = Tensor<T>(value.shape(), T(0));
  e.live = std::move(value);
  index_[name] = entries_.size();
  names_.push_back(name);
  entries_.push_back(std::move(e));
}

template <class T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.live.size();
  return n;
}

template <class T>
const typename ParamStore<T>::Entry& ParamStore<T>::entry(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return entries_[it->second];
}

template <class T>
typename ParamStore<T>::Entry& ParamStore<T>::entry(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamStore: unknown parameter '" + name + "'");
  return entries_[it->second];
}

template <class T>
const Tensor<T>& ParamStore<T>::get(const std::string& name, Weights w) const {
  const Entry& e = entry(name);
  return w == Weights::live ? e.live : e.ema;
}

template <class T>
std::uint64_t ParamStore<T>::hash(bool include_ema) const {
  std::uint64_t h = kFnvOffset;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    fnv_mix(h, names_[i].data(), names_[i].size());
    const Entry& e = entries_[i];
    fnv_mix(h, e.live.data(), e.live.size() * sizeof(T));
    if (include_ema) fnv_mix(h, e.ema.data(), e.ema.size() * sizeof(T));
  }
  return h;
}

template <class T>
void adam_step(ParamStore<T>& store, const ad::Gradients<T>& grads, const AdamConfig& cfg) {
  if (grads.size() != store.size()) {
    for (const auto& [name, g] : grads)
      if (!store.contains(name)) throw ContractError("adam_step: gradient for unknown parameter '" + name + "'");
  }
  const std::uint64_t step = store.step() + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
  const T step_size = static_cast<T>(cfg.lr / c1);
  const T inv_c2 = static_cast<T>(1.0 / c2);
  const T eps = static_cast<T>(cfg.eps);
  for (const std::string& name : store.names()) {
    auto it = grads.find(name);
    if (it == grads.end()) throw ContractError("adam_step: missing gradient for '" + name + "'");
    auto& e = store.entry(name);
    const Tensor<T>& g = it->second;
    if (g.size() != e.live.size()) throw ShapeError("adam_step: gradient shape mismatch for '" + name + "'");
    for (std::size_t k = 0; k < g.size(); ++k) {
      e.first_moment[k] = b1 * e.first_moment[k] + (T(1) - b1) * g[k];
      e.second_moment[k] = b2 * e.second_moment[k] + (T(1) - b2) * g[k] * g[k];
      e.live[k] -= step_size * e.first_moment[k] / (std::sqrt(e.second_moment[k] * inv_c2) + eps);
    }
  }
  store.set_step(step);
}

template <class T>
void ema_update(ParamStore<T>& store, double rate) {
  const T r = static_cast<T>(rate);
  if (rate == 1.0) return;
  for (const std::string& name : store.names()) {
    auto& e = store.entry(name);
    for (std::size_t k = 0; k < e.live.size(); ++k) e.ema[k] = r * e.ema[k] + (T(1) - r) * e.live[k];
  }
}

template <class T>
ad::Gradients<T> gradients_for(const ParamStore<T>& store, const ad::Gradients<T>& grads) {
  ad::Gradients<T> out;
  for (const std::string& name : store.names()) {
    auto it = grads.find(name);
    out.emplace(name, it != grads.end() ? it->second : Tensor<T>(store.get(name).shape(), T(0)));
  }
  return out;
}

template <class T>
double global_norm(const ad::Gradients<T>& grads) {
  double s = 0;
  for (const auto& [name, g] : grads) s += squared_norm(g);
  return std::sqrt(s);
}

template <class T>
ad::Var<T> bind(ad::Tape<T>& tape, const ParamStore<T>& store, const std::string& name, Weights w) {
  return tape.param(name, store.get(name, w));
}

template <class T>
Mlp<T>::Mlp(std::string prefix, std::vector<std::size_t> widths)
    : prefix_(std::move(prefix)), widths_(std::move(widths)) {
  if (widths_.size() < 2) throw ContractError("Mlp: need at least input and output widths");
  for (std::size_t w : widths_)
    if (w == 0) throw ShapeError("Mlp: zero width");
}

template <class T>
void Mlp<T>::init(ParamStore<T>& store, RandomStream& rng, double output_scale) const {
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::size_t fan_in = widths_[l], fan_out = widths_[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    if (l + 2 == widths_.size()) bound *= output_scale;
    Tensor<T> w = Tensor<T>::matrix(fan_in, fan_out);
    for (T& v : w.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    Tensor<T> b = Tensor<T>::matrix(1, fan_out);
    for (T& v : b.values()) v = static_cast<T>(rng.uniform(-bound, bound));
    store.add(prefix_ + ".l" + std::to_string(l) + ".w", std::move(w));
    store.add(prefix_ + ".l" + std::to_string(l) + ".b", std::move(b));
  }
}

template <class T>
ad::Var<T> Mlp<T>::forward(ad::Tape<T>& tape, const ParamStore<T>& store, ad::Var<T> x,
                           Weights w) const {
  if (x.cols() != in_dim()) {
    throw ShapeError("Mlp '" + prefix_ + "': expected " + std::to_string(in_dim()) +
                     " input features, got " + std::to_string(x.cols()));
  }
  ad::Var<T> h = x;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    const std::string base = prefix_ + ".l" + std::to_string(l);
    h = ad::linear(h, dbae::bind(tape, store, base + ".w", w), dbae::bind(tape, store, base + ".b", w));
    if (l + 2 < widths_.size()) h = ad::silu(h);
  }
  return h;
}

template <class T>
Tensor<T> time_embed(std::span<const double> t, std::size_t dim, double max_freq) {
  if (dim == 0 || dim % 2 != 0) throw ShapeError("time_embed: dim must be positive and even");
  const std::size_t half = dim / 2;
  Tensor<T> out = Tensor<T>::matrix(t.size(), dim);
  for (std::size_t k = 0; k < half; ++k) {
    const double freq = std::pow(max_freq, static_cast<double>(k) / static_cast<double>(half));
    for (std::size_t i = 0; i < t.size(); ++i) {
      out(i, k) = static_cast<T>(std::sin(freq * t[i]));
      out(i, half + k) = static_cast<T>(std::cos(freq * t[i]));
    }
  }
  return out;
}

#define DBAE_INSTANTIATE(T)                                                                \
  template class ParamStore<T>;                                                            \
  template class Mlp<T>;                                                                   \
  template void adam_step(ParamStore<T>&, const ad::Gradients<T>&, const AdamConfig&);     \
  template void ema_update(ParamStore<T>&, double);                                        \
  template ad::Gradients<T> gradients_for(const ParamStore<T>&, const ad::Gradients<T>&);  \
  template double global_norm(const ad::Gradients<T>&);                                    \
  template ad::Var<T> bind(ad::Tape<T>&, const ParamStore<T>&, const std::string&, Weights); \
  template Tensor<T> time_embed<T>(std::span<const double>, std::size_t, double);

DBAE_INSTANTIATE(float)
DBAE_INSTANTIATE(double)

}  // namespace dbae
