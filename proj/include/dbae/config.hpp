// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "dbae/prior.hpp"
#include "dbae/sample.hpp"
#include "dbae/train.hpp"

namespace dbae {

struct DataConfig {
  std::string path;           // TensorFile or CSV; empty uses `toy`
  std::string toy = "two_moons";
  std::size_t n = 4096;
  double noise = -1.0;        // < 0: the toy's default
  std::size_t holdout = 2048; // held-out rows drawn from an independent stream
};

struct ScheduleConfig {
  double beta_min = 0.1;
  double beta_max = 20.0;
  double t_end = 1.0;
  double eps_t = 1e-4;
};

struct EvalConfig {
  std::size_t n_generate = 2048;
  std::size_t sw_projections = 256;
  std::size_t recon_rows = 1024;
};

/// Everything needed to repeat a run. Loaded from YAML (nested maps or
/// dotted keys), then `key=value` overrides; unknown keys are errors.
struct RunConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  ScheduleConfig schedule;
  ModelConfig model = ModelConfig::with_dims(2, 2);
  TrainConfig train;
  LatentPriorConfig prior;
  SamplerConfig sampler;
  EvalConfig eval;

  VpSchedule vp_schedule() const;
  BridgeKernel kernel() const;
  /// Cross-field checks; throws ConfigError.
  void validate() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  /// FNV-1a of the canonical JSON text, 16 hex digits.
  std::string hash() const;
};

/// Applies one dotted-key assignment with schema checking.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);
/// "key=value" form used on the command line.
void apply_override(RunConfig& cfg, const std::string& assignment);

RunConfig parse_run_config(const std::string& yaml_text);
/// Empty path: defaults. Overrides are applied after the file, then validate().
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// All accepted dotted keys.
std::vector<std::string> config_keys();

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace dbae
