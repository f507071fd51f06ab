// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace dbae {

/// Seeded random source with a portable normal sampler and serializable state.
///
/// std::normal_distribution caches a second variate and is implementation
/// defined, which breaks bit-exact checkpoint resume; normals here use
/// Box-Muller with no cached state, so the engine state is the whole state.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Uniform index in [0, n).
  std::size_t index(std::size_t n);

  /// Independent stream derived from this stream's seed and `index`; does not
  /// advance this stream.
  RandomStream substream(std::uint64_t index) const;

  std::uint64_t seed() const { return seed_; }
  /// Count of 64-bit words consumed so far.
  std::uint64_t draws() const { return draws_; }

  std::string state() const;
  void set_state(const std::string& state);

  friend bool operator==(const RandomStream& a, const RandomStream& b) {
    return a.seed_ == b.seed_ && a.draws_ == b.draws_ && a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  std::uint64_t draws_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace dbae
