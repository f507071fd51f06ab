// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dbae/tensor_file.hpp"

namespace dbae {

namespace fs = std::filesystem;

namespace {

enum Substream : std::uint64_t { kInit = 0, kData = 1, kHoldout = 2, kTrain = 3, kPriorData = 4, kPriorInit = 5, kEval = 6, kSampling = 100 };

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("an output directory (--out) is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
}

std::string metrics_header() { return "step,loss_ae,loss_tc,grad_norm,wall_ms"; }

std::string metrics_row(const StepMetrics& m) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.3f", static_cast<unsigned long long>(m.step), m.loss_ae,
                m.loss_tc, m.grad_norm, m.wall_ms);
  return buf;
}

void check_dims(const RunConfig& cfg, const Dataset& d, const std::string& what) {
  if (d.x.cols() != cfg.model.encoder.data_dim)
    throw DataError(what + ": data has " + std::to_string(d.x.cols()) + " columns, model.data_dim is " +
                    std::to_string(cfg.model.encoder.data_dim));
}

void write_points(const std::string& out_dir, const std::string& stem, const Tensor<float>& x) {
  write_tensor_file(join(out_dir, stem + ".dbt"), x);
  const Tensor<double> xd = x.cast<double>();
  if (x.cols() == 64) write_pgm_grid(join(out_dir, stem + ".pgm"), xd.rows_slice(0, std::min<std::size_t>(xd.rows(), 128)));
  else write_csv(join(out_dir, stem + ".csv"), xd);
}

RandomStream sampling_stream(const RunConfig& cfg) { return RandomStream(cfg.seed).substream(kSampling + cfg.sampler.seed); }

void say(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n';
}

}  // namespace

std::uint64_t model_init_seed(const RunConfig& cfg) { return RandomStream(cfg.seed).substream(kInit).next_u64(); }

RandomStream training_stream(const RunConfig& cfg) { return RandomStream(cfg.seed).substream(kTrain); }

Dataset resolve_dataset(const RunConfig& cfg, const std::string& override_path) {
  Dataset d;
  if (!override_path.empty()) d = load_dataset(override_path);
  else if (!cfg.data.path.empty()) d = load_dataset(cfg.data.path);
  else {
    RandomStream rng = RandomStream(cfg.seed).substream(kData);
    d = make_toy(cfg.data.toy, cfg.data.n, rng, cfg.data.noise);
  }
  check_dims(cfg, d, "dataset");
  return d;
}

std::optional<Dataset> resolve_holdout(const RunConfig& cfg) {
  if (!cfg.data.path.empty() || cfg.data.holdout == 0) return std::nullopt;
  RandomStream rng = RandomStream(cfg.seed).substream(kHoldout);
  return make_toy(cfg.data.toy, cfg.data.holdout, rng, cfg.data.noise);
}

std::vector<StepMetrics> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<StepMetrics> rows;
  std::string line;
  std::getline(in, line);
  if (line != metrics_header()) throw DataError(path + ": unexpected metrics header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StepMetrics m;
    unsigned long long step = 0;
    if (std::sscanf(line.c_str(), "%llu,%lf,%lf,%lf,%lf", &step, &m.loss_ae, &m.loss_tc, &m.grad_norm, &m.wall_ms) != 5)
      throw RaggedCsvError(path + ": malformed metrics row '" + line + "'");
    m.step = step;
    rows.push_back(m);
  }
  return rows;
}

TrainOutcome run_train(const RunConfig& cfg, const TrainOptions& opt) {
  cfg.validate();
  ensure_dir(opt.out_dir);
  const Dataset data = resolve_dataset(cfg);
  ModelBundle<float> bundle(cfg.model, cfg.kernel(), model_init_seed(cfg));
  RandomStream rng = training_stream(cfg);
  const std::string hash = cfg.hash();
  const std::string metrics_path = join(opt.out_dir, "metrics.csv");
  TrainOutcome outcome;
  outcome.checkpoint_path = join(opt.out_dir, "checkpoint.dbc");

  std::uint64_t start = 0;
  std::vector<std::string> kept;
  if (!opt.resume.empty()) {
    const CheckpointMeta meta = load_checkpoint(opt.resume, bundle_stores(bundle), &hash);
    rng.set_state(meta.rng_state);
    start = meta.step;
    if (fs::exists(metrics_path))
      for (const StepMetrics& m : read_metrics_csv(metrics_path))
        if (m.step <= start) kept.push_back(metrics_row(m));
    say(opt.log, "resumed from " + opt.resume + " at step " + std::to_string(start));
  }
  std::ofstream metrics(metrics_path, std::ios::trunc);
  if (!metrics) throw DataError("cannot open " + metrics_path + " for writing");
  metrics << metrics_header() << '\n';
  for (const std::string& row : kept) metrics << row << '\n';
  metrics.flush();

  std::uint64_t stop = cfg.train.total_steps;
  if (opt.stop_after > 0) stop = std::min(stop, opt.stop_after);

  TrainCallbacks cb;
  cb.on_metrics = [&](const StepMetrics& m) {
    metrics << metrics_row(m) << '\n';
    metrics.flush();
    outcome.metrics.push_back(m);
    if (opt.log) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "step %llu loss_ae %.6g loss_tc %.6g grad_norm %.4g",
                    static_cast<unsigned long long>(m.step), m.loss_ae, m.loss_tc, m.grad_norm);
      say(opt.log, buf);
    }
  };
  cb.on_checkpoint = [&](std::uint64_t step) {
    CheckpointMeta meta;
    meta.config = cfg.to_json();
    meta.config_hash = hash;
    meta.rng_state = rng.state();
    meta.step = step;
    const ModelBundle<float>& cb_bundle = bundle;
    save_checkpoint(outcome.checkpoint_path, meta, bundle_stores(cb_bundle));
  };
  train_loop(bundle, data.x, cfg.train, rng, start, stop, cb);
  outcome.final_step = std::max(start, stop);
  return outcome;
}

LoadedModel load_model(const std::string& checkpoint_path) {
  const CheckpointMeta head = read_checkpoint_meta(checkpoint_path);
  RunConfig cfg = RunConfig::from_json(head.config);
  cfg.validate();
  LoadedModel m{cfg, ModelBundle<float>(cfg.model, cfg.kernel(), 0), head};
  m.meta = load_checkpoint(checkpoint_path, bundle_stores(m.bundle));
  return m;
}

void save_prior(const std::string& path, const RunConfig& cfg, const LatentPrior<float>& prior) {
  CheckpointMeta meta;
  meta.config = cfg.to_json();
  meta.config_hash = cfg.hash();
  meta.rng_state = RandomStream(cfg.seed).state();
  meta.step = prior.params().step();
  meta.z_stats = prior.stats();
  save_checkpoint(path, meta, {{"prior", &prior.params()}});
}

LoadedPrior load_prior(const std::string& prior_path) {
  const CheckpointMeta head = read_checkpoint_meta(prior_path);
  RunConfig cfg = RunConfig::from_json(head.config);
  cfg.validate();
  LoadedPrior p{cfg, LatentPrior<float>(cfg.prior, cfg.model.encoder.latent_dim, 0)};
  const CheckpointMeta meta = load_checkpoint(prior_path, {{"prior", &p.prior.params()}});
  if (!meta.z_stats) throw DataError(prior_path + ": prior checkpoint lacks z-norm stats");
  p.prior.set_stats(*meta.z_stats);
  return p;
}

LatentPrior<float> run_train_prior(const RunConfig& cfg, const std::string& checkpoint_path,
                                   const std::string& out_dir, std::ostream* log) {
  ensure_dir(out_dir);
  const LoadedModel model = load_model(checkpoint_path);
  const Dataset data = resolve_dataset(cfg);
  check_dims(model.config, data, "train-prior");
  const std::uint64_t before = model.bundle.encoder_params().hash(true) ^ model.bundle.decoder_params().hash(true) ^
                               model.bundle.score_params().hash(true);

  RandomStream rng = RandomStream(cfg.seed).substream(kPriorData);
  const bool gaussian = model.bundle.encoder_mode() == EncoderMode::gaussian;
  const Tensor<float> codes = encode_dataset(model.bundle, data.x, gaussian ? &rng : nullptr);
  LatentPrior<float> prior(cfg.prior, model.bundle.latent_dim(), RandomStream(cfg.seed).substream(kPriorInit).next_u64());

  std::ofstream metrics(join(out_dir, "prior_metrics.csv"), std::ios::trunc);
  metrics << "step,loss,grad_norm\n";
  train_prior<float>(
      prior, codes, rng,
      [&](const PriorStepMetrics& m) {
        metrics << m.step << ',' << m.loss << ',' << m.grad_norm << '\n';
        if (log) *log << "prior step " << m.step << " loss " << m.loss << '\n';
      },
      std::max<std::size_t>(1, cfg.train.log_every));

  const std::uint64_t after = model.bundle.encoder_params().hash(true) ^ model.bundle.decoder_params().hash(true) ^
                              model.bundle.score_params().hash(true);
  if (before != after) throw std::logic_error("prior training modified the autoencoder parameters");
  RunConfig saved = model.config;
  saved.prior = cfg.prior;
  save_prior(join(out_dir, "prior.dbc"), saved, prior);
  return prior;
}

SampleResult<float> run_reconstruct(const Procedures& p, const Dataset& data, const std::string& out_dir,
                                    const std::string& trajectory_csv) {
  ensure_dir(out_dir);
  check_dims(p.model.config, data, "reconstruct");
  RandomStream rng = sampling_stream(p.cfg);
  Trajectory traj;
  const SampleResult<float> r = reconstruct(p.model.bundle, data.x, p.cfg.sampler, &rng,
                                            trajectory_csv.empty() ? nullptr : &traj);
  if (!trajectory_csv.empty()) write_trajectory_csv(trajectory_csv, traj);
  write_points(out_dir, "recon", r.x0);
  const double mse = recon_error(data.x.cast<double>(), r.x0.cast<double>(), ReconMetric::mse);
  say(p.log, "recon_mse " + std::to_string(mse));
  say(p.log, "nfe encoder=" + std::to_string(r.nfe.encoder) + " decoder=" + std::to_string(r.nfe.decoder) +
                 " score=" + std::to_string(r.nfe.score));
  return r;
}

SampleResult<float> run_generate(const Procedures& p, const LatentPrior<float>& prior, std::size_t n,
                                 const std::string& out_dir) {
  ensure_dir(out_dir);
  RandomStream rng = sampling_stream(p.cfg);
  const SampleResult<float> r = generate(p.model.bundle, prior, n, p.cfg.sampler, rng);
  write_points(out_dir, "samples", r.x0);
  say(p.log, "generated " + std::to_string(n) + " samples, nfe prior=" + std::to_string(r.nfe.prior) +
                 " decoder=" + std::to_string(r.nfe.decoder) + " score=" + std::to_string(r.nfe.score));
  return r;
}

Interpolation<float> run_interpolate(const Procedures& p, const Dataset& data, std::size_t index_a,
                                     std::size_t index_b, const std::vector<double>& lambdas,
                                     const std::string& out_dir) {
  ensure_dir(out_dir);
  if (index_a >= data.x.rows() || index_b >= data.x.rows()) throw DataError("interpolate: row index out of range");
  RandomStream rng = sampling_stream(p.cfg);
  const Interpolation<float> r = interpolate(p.model.bundle, data.x.rows_slice(index_a, 1),
                                             data.x.rows_slice(index_b, 1), lambdas, p.cfg.sampler, &rng);
  const std::size_t d = data.x.cols();
  Tensor<float> x0 = Tensor<float>::matrix(lambdas.size(), d), ends = Tensor<float>::matrix(lambdas.size(), d);
  for (std::size_t i = 0; i < lambdas.size(); ++i) {
    std::copy(r.x0[i].values().begin(), r.x0[i].values().end(), x0.row(i).begin());
    std::copy(r.x_end[i].values().begin(), r.x_end[i].values().end(), ends.row(i).begin());
  }
  write_points(out_dir, "interp", x0);
  write_points(out_dir, "interp_endpoints", ends);
  say(p.log, "interpolated " + std::to_string(lambdas.size()) + " points");
  return r;
}

SampleResult<float> run_manipulate(const Procedures& p, const Dataset& data, double strength, std::size_t rows,
                                   const std::string& out_dir) {
  ensure_dir(out_dir);
  if (!data.labels) throw DataError("manipulate: the dataset has no labels to fit a probe on");
  const ModelBundle<float>& bundle = p.model.bundle;
  const Tensor<double> z = bundle.encode_mean(data.x, Weights::ema).z.cast<double>();
  const std::vector<double> labels(data.labels->values().begin(), data.labels->values().end());
  const ProbeModel probe = fit_probe_logistic(z, labels);
  Tensor<float> direction = probe.w.cast<float>().reshaped({bundle.latent_dim()});
  const double norm = std::sqrt(squared_norm(direction));
  if (!(norm > 0)) throw NumericFault("manipulate: probe direction is zero");
  direction = scaled(direction, 1.0 / norm);

  const std::size_t count = std::min(rows, data.x.rows());
  const Tensor<float> x0 = data.x.rows_slice(0, count);
  RandomStream rng = sampling_stream(p.cfg);
  const SampleResult<float> r = manipulate(bundle, x0, direction, strength, p.cfg.sampler, &rng);
  write_points(out_dir, "manip", r.x0);
  write_points(out_dir, "manip_source", x0);
  const Tensor<double> before = probe.predict(z.rows_slice(0, count));
  const Tensor<double> after = probe.predict(bundle.encode_mean(r.x0, Weights::ema).z.cast<double>());
  double mb = 0, ma = 0;
  for (std::size_t i = 0; i < count; ++i) mb += before[i], ma += after[i];
  say(p.log, "probe_logit_mean before=" + std::to_string(mb / count) + " after=" + std::to_string(ma / count));
  return r;
}

std::vector<EvalRow> run_eval(const Procedures& p, const Dataset& data, const LatentPrior<float>* prior,
                              const std::string& out_dir) {
  ensure_dir(out_dir);
  const ModelBundle<float>& bundle = p.model.bundle;
  const RunConfig& cfg = p.cfg;
  std::vector<EvalRow> rows;
  RandomStream rng = RandomStream(cfg.seed).substream(kEval);

  const std::size_t n_recon = std::min(cfg.eval.recon_rows, data.x.rows());
  const Tensor<float> x_recon = data.x.rows_slice(0, n_recon);
  const SampleResult<float> rec = reconstruct(bundle, x_recon, cfg.sampler, &rng);
  rows.push_back({"recon_mse", recon_error(x_recon.cast<double>(), rec.x0.cast<double>(), ReconMetric::mse)});
  if (data.x.cols() == 64)
    rows.push_back({"recon_ssim", recon_error(x_recon.cast<double>(), rec.x0.cast<double>(), ReconMetric::ssim_window)});

  const bool gaussian = bundle.encoder_mode() == EncoderMode::gaussian;
  const Tensor<float> codes = encode_dataset(bundle, data.x, gaussian ? &rng : nullptr);
  const LatentStats stats = latent_stats(codes.cast<double>());
  rows.push_back({"gaussian_tc", stats.gaussian_tc});

  if (data.labels) {
    const Tensor<double> means = bundle.encode_mean(data.x, Weights::ema).z.cast<double>();
    const std::vector<double> labels(data.labels->values().begin(), data.labels->values().end());
    bool both = false;
    for (double l : labels) both = both || l != labels.front();
    if (both) {
      const ProbeModel probe = fit_probe_logistic(means, labels);
      rows.push_back({"probe_auroc", probe_scores(probe, means, labels).auroc});
    }
  }

  if (prior) {
    const std::optional<Dataset> holdout = resolve_holdout(cfg);
    const Tensor<double> ref = (holdout ? holdout->x : data.x).cast<double>();
    const std::size_t n = cfg.eval.n_generate;
    const SampleResult<float> gen = generate(bundle, *prior, n, cfg.sampler, rng);
    rows.push_back({"sw_generated", sliced_wasserstein(gen.x0.cast<double>(), ref, cfg.eval.sw_projections, cfg.seed)});
    const SampleResult<float> gen_ae = generate_from_codes(bundle, codes, n, cfg.sampler, rng);
    rows.push_back({"sw_generated_ae", sliced_wasserstein(gen_ae.x0.cast<double>(), ref, cfg.eval.sw_projections, cfg.seed)});
  }
  append_eval_report(join(out_dir, "eval.csv"), rows, cfg.hash(), cfg.seed);
  for (const EvalRow& r : rows) say(p.log, r.metric + " " + std::to_string(r.value));
  return rows;
}

std::string run_make_toy_data(const RunConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  if (!is_toy_name(cfg.data.toy)) throw ConfigError("unknown toy dataset '" + cfg.data.toy + "'");
  RandomStream rng = RandomStream(cfg.seed).substream(kData);
  const Dataset d = make_toy(cfg.data.toy, cfg.data.n, rng, cfg.data.noise);
  const std::string path = join(out_dir, "data.dbt");
  save_dataset(path, d);
  if (d.x.cols() == 64) write_pgm_grid(join(out_dir, "data.pgm"), d.x.cast<double>().rows_slice(0, std::min<std::size_t>(d.x.rows(), 128)));
  return path;
}

}  // namespace dbae
