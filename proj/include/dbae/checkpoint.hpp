// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbae/config.hpp"

namespace dbae {

inline constexpr int kCheckpointVersion = 1;

/// Header fields besides the parameter manifest.
struct CheckpointMeta {
  int format_version = kCheckpointVersion;
  nlohmann::json config;  // RunConfig::to_json()
  std::string config_hash;
  std::string rng_state;
  std::uint64_t step = 0;
  std::optional<ZStats> z_stats;
};

/// A named group of parameters ("encoder", "decoder", "score", "prior").
struct StoreRef {
  std::string group;
  ParamStore<float>* store;
};
struct ConstStoreRef {
  std::string group;
  const ParamStore<float>* store;
};

/// "DBC1" | u64 LE header length | JSON header | f32 LE body.
/// Body blocks per parameter in manifest order: live, ema, adam_m, adam_v.
std::vector<std::uint8_t> encode_checkpoint(const CheckpointMeta& meta, const std::vector<ConstStoreRef>& stores);
void save_checkpoint(const std::string& path, const CheckpointMeta& meta, const std::vector<ConstStoreRef>& stores);

/// Reads the header only (also validates the manifest against the body size).
CheckpointMeta read_checkpoint_meta(const std::string& path);

/// Fills `stores`, which must match the manifest exactly (names, shapes,
/// groups). When `expected_hash` is given it must equal the stored one.
CheckpointMeta load_checkpoint(const std::string& path, const std::vector<StoreRef>& stores,
                               const std::string* expected_hash = nullptr);
CheckpointMeta decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::vector<StoreRef>& stores,
                                 const std::string* expected_hash = nullptr, const std::string& what = "checkpoint");

std::vector<ConstStoreRef> bundle_stores(const ModelBundle<float>& bundle);
std::vector<StoreRef> bundle_stores(ModelBundle<float>& bundle);

}  // namespace dbae
