// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dbae/autodiff.hpp"
#include "dbae/random.hpp"
#include "dbae/tensor.hpp"

namespace dbae {

/// Which copy of the parameters a forward pass reads.
enum class Weights { live, ema };

/// Named parameter tensors with Adam moments and an EMA shadow copy.
template <class T>
class ParamStore {
 public:
  struct Entry {
    Tensor<T> live;
    Tensor<T> ema;
    Tensor<T> first_moment;
    Tensor<T> second_moment;
  };

  /// Registers a parameter; the EMA starts equal to the live value.
  void add(const std::string& name, Tensor<T> value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t parameter_count() const;

  const Entry& entry(const std::string& name) const;
  Entry& entry(const std::string& name);
  const Tensor<T>& get(const std::string& name, Weights w = Weights::live) const;
  Tensor<T>& live(const std::string& name) { return entry(name).live; }

  std::uint64_t step() const { return step_; }
  void set_step(std::uint64_t step) { step_ = step; }

  /// FNV-1a over names and live (optionally also EMA) bytes.
  std::uint64_t hash(bool include_ema = false) const;

  friend bool operator==(const ParamStore& a, const ParamStore& b) {
    if (a.names_ != b.names_ || a.step_ != b.step_) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const Entry& x = a.entries_[i];
      const Entry& y = b.entries_[i];
      if (!(x.live == y.live && x.ema == y.ema && x.first_moment == y.first_moment &&
            x.second_moment == y.second_moment))
        return false;
    }
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::map<std::string, std::size_t> index_;
  std::vector<Entry> entries_;
  std::uint64_t step_ = 0;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update of every parameter in `store`. `grads` must hold exactly
/// the store's names, with matching shapes.
template <class T>
void adam_step(ParamStore<T>& store, const ad::Gradients<T>& grads, const AdamConfig& cfg);

/// shadow <- rate * shadow + (1 - rate) * live.
template <class T>
void ema_update(ParamStore<T>& store, double rate);

/// Restricts `grads` to the names of `store`, filling zeros for parameters the
/// loss never touched.
template <class T>
ad::Gradients<T> gradients_for(const ParamStore<T>& store, const ad::Gradients<T>& grads);

template <class T>
double global_norm(const ad::Gradients<T>& grads);

template <class T>
ad::Var<T> bind(ad::Tape<T>& tape, const ParamStore<T>& store, const std::string& name, Weights w);

/// Fully connected network with SiLU between layers and a linear output.
template <class T>
class Mlp {
 public:
  Mlp() = default;
  /// `widths` = {in, hidden..., out}; parameters are "<prefix>.l<i>.w/b".
  Mlp(std::string prefix, std::vector<std::size_t> widths);

  std::size_t in_dim() const { return widths_.front(); }
  std::size_t out_dim() const { return widths_.back(); }
  const std::string& prefix() const { return prefix_; }
  const std::vector<std::size_t>& widths() const { return widths_; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init; the output layer is
  /// further multiplied by `output_scale`.
  void init(ParamStore<T>& store, RandomStream& rng, double output_scale = 1.0) const;

  ad::Var<T> forward(ad::Tape<T>& tape, const ParamStore<T>& store, ad::Var<T> x,
                     Weights w = Weights::live) const;

 private:
  std::string prefix_;
  std::vector<std::size_t> widths_;
};

/// Sinusoidal time features: row i is [sin(w_k t_i)..., cos(w_k t_i)...] with
/// w_k = max_freq^(k / (dim/2)), so w_0 = 1.
template <class T>
Tensor<T> time_embed(std::span<const double> t, std::size_t dim, double max_freq = 100.0);

}  // namespace dbae
