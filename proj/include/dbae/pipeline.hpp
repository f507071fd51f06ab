// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>

#include "dbae/checkpoint.hpp"
#include "dbae/dataset.hpp"
#include "dbae/eval.hpp"

namespace dbae {

/// Training data named by the config: data.path, or the toy drawn from the
/// seed's data substream. `override_path` wins when non-empty.
Dataset resolve_dataset(const RunConfig& cfg, const std::string& override_path = {});
/// Held-out toy rows from an independent substream (empty for file data).
std::optional<Dataset> resolve_holdout(const RunConfig& cfg);

std::uint64_t model_init_seed(const RunConfig& cfg);
RandomStream training_stream(const RunConfig& cfg);

struct TrainOptions {
  std::string out_dir;
  std::string resume;           // checkpoint to continue from
  std::uint64_t stop_after = 0;  // 0: run to train.total_steps
  std::ostream* log = nullptr;
};

struct TrainOutcome {
  std::uint64_t final_step = 0;
  std::string checkpoint_path;
  std::vector<StepMetrics> metrics;  // rows emitted by this invocation
};

/// Writes out_dir/metrics.csv and out_dir/checkpoint.dbc.
TrainOutcome run_train(const RunConfig& cfg, const TrainOptions& opt);

/// Reads a metrics CSV back (wall_ms included).
std::vector<StepMetrics> read_metrics_csv(const std::string& path);

struct LoadedModel {
  RunConfig config;
  ModelBundle<float> bundle;
  CheckpointMeta meta;
};
LoadedModel load_model(const std::string& checkpoint_path);

struct LoadedPrior {
  RunConfig config;
  LatentPrior<float> prior;
};
LoadedPrior load_prior(const std::string& prior_path);
void save_prior(const std::string& path, const RunConfig& cfg, const LatentPrior<float>& prior);

/// Encodes the training data with the frozen model and fits the latent prior.
/// Writes out_dir/prior.dbc and out_dir/prior_metrics.csv.
LatentPrior<float> run_train_prior(const RunConfig& cfg, const std::string& checkpoint_path,
                                   const std::string& out_dir, std::ostream* log = nullptr);

/// Sampler and eval settings come from `cfg`; the model from the checkpoint.
struct Procedures {
  const RunConfig& cfg;
  const LoadedModel& model;
  std::ostream* log = nullptr;
};

SampleResult<float> run_reconstruct(const Procedures& p, const Dataset& data, const std::string& out_dir,
                                    const std::string& trajectory_csv = {});
SampleResult<float> run_generate(const Procedures& p, const LatentPrior<float>& prior, std::size_t n,
                                 const std::string& out_dir);
Interpolation<float> run_interpolate(const Procedures& p, const Dataset& data, std::size_t index_a,
                                     std::size_t index_b, const std::vector<double>& lambdas,
                                     const std::string& out_dir);
SampleResult<float> run_manipulate(const Procedures& p, const Dataset& data, double strength, std::size_t rows,
                                   const std::string& out_dir);

/// Reconstruction error, latent statistics, probe AUROC (labelled data) and,
/// with a prior, sliced Wasserstein of generated vs held-out points for both
/// the prior and the encoded-data codes. Appends to out_dir/eval.csv.
std::vector<EvalRow> run_eval(const Procedures& p, const Dataset& data, const LatentPrior<float>* prior,
                              const std::string& out_dir);

/// Analytic identities; prints one line per check.
bool run_selftest(std::ostream& out);

/// Writes the data as a TensorFile (plus labels) under out_dir/data.dbt.
std::string run_make_toy_data(const RunConfig& cfg, const std::string& out_dir);

}  // namespace dbae
