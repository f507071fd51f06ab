// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <iostream>
#include <optional>

#include "dbae/pipeline.hpp"

namespace dbae {

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, Common& c, bool needs_out = true) {
  sub->add_option("--config", c.config, "YAML run config");
  sub->add_option("--set", c.sets, "override, key=value (repeatable)")->take_all();
  auto* out = sub->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  sub->add_option("--seed", c.seed, "run seed");
}

// The checkpoint's own config is the base when no --config is given.
RunConfig resolve_config(const Common& c, const std::string& checkpoint = {}) {
  RunConfig cfg;
  if (!c.config.empty() || checkpoint.empty()) {
    cfg = load_run_config(c.config, c.sets);
  } else {
    cfg = RunConfig::from_json(read_checkpoint_meta(checkpoint).config);
    for (const std::string& s : c.sets) apply_override(cfg, s);
  }
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Diffusion bridge autoencoders"};
  app.require_subcommand(1);

  Common common;
  std::string checkpoint, prior_path, data_path, resume, trajectory;
  std::uint64_t stop_after = 0;
  std::size_t n = 0, index_a = 0, index_b = 1, rows = 16;
  std::vector<double> lambdas{0.0, 0.25, 0.5, 0.75, 1.0};
  double strength = 1.0;

  auto* train = app.add_subcommand("train", "train the autoencoder and bridge score");
  add_common(train, common);
  train->add_option("--resume", resume, "checkpoint to continue from");
  train->add_option("--stop-after", stop_after, "stop at this step (config unchanged)");

  auto* train_prior = app.add_subcommand("train-prior", "fit the latent prior on frozen codes");
  add_common(train_prior, common);
  train_prior->add_option("--checkpoint", checkpoint)->required();
  train_prior->add_option("--data", data_path, "data file (default: the config's data)");

  auto* recon = app.add_subcommand("reconstruct", "encode, decode the endpoint, run the bridge back");
  add_common(recon, common);
  recon->add_option("--checkpoint", checkpoint)->required();
  recon->add_option("--data", data_path);
  recon->add_option("--trajectory", trajectory, "write reverse trajectories to this CSV");

  auto* gen = app.add_subcommand("generate", "sample latents from the prior and decode");
  add_common(gen, common);
  gen->add_option("--checkpoint", checkpoint)->required();
  gen->add_option("--prior", prior_path)->required();
  gen->add_option("--n", n, "number of samples (default eval.n_generate)");

  auto* interp = app.add_subcommand("interpolate", "interpolate two rows through the latent");
  add_common(interp, common);
  interp->add_option("--checkpoint", checkpoint)->required();
  interp->add_option("--data", data_path);
  interp->add_option("--index-a", index_a);
  interp->add_option("--index-b", index_b);
  interp->add_option("--lambdas", lambdas)->delimiter(',');

  auto* manip = app.add_subcommand("manipulate", "move codes along a linear probe direction");
  add_common(manip, common);
  manip->add_option("--checkpoint", checkpoint)->required();
  manip->add_option("--data", data_path);
  manip->add_option("--strength", strength);
  manip->add_option("--rows", rows);

  auto* eval = app.add_subcommand("eval", "reconstruction, latent and generation metrics");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--prior", prior_path);
  eval->add_option("--data", data_path);

  auto* toy = app.add_subcommand("make-toy-data", "write a built-in toy dataset");
  add_common(toy, common);

  auto* selftest = app.add_subcommand("selftest", "analytic identity checks");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (selftest->parsed()) return run_selftest(out) ? kExitOk : kExitOther;

    if (toy->parsed()) {
      const RunConfig cfg = resolve_config(common);
      out << run_make_toy_data(cfg, common.out) << '\n';
      return kExitOk;
    }
    if (train->parsed()) {
      const RunConfig cfg = resolve_config(common);
      TrainOptions opt{common.out, resume, stop_after, &out};
      const TrainOutcome r = run_train(cfg, opt);
      out << "checkpoint " << r.checkpoint_path << " step " << r.final_step << '\n';
      return kExitOk;
    }
    if (train_prior->parsed()) {
      RunConfig cfg = resolve_config(common, checkpoint);
      if (!data_path.empty()) cfg.data.path = data_path;
      run_train_prior(cfg, checkpoint, common.out, &out);
      return kExitOk;
    }

    const RunConfig cfg = resolve_config(common, checkpoint);
    const LoadedModel model = load_model(checkpoint);
    const Procedures p{cfg, model, &out};
    if (recon->parsed()) {
      run_reconstruct(p, resolve_dataset(cfg, data_path), common.out, trajectory);
    } else if (gen->parsed()) {
      const LoadedPrior prior = load_prior(prior_path);
      run_generate(p, prior.prior, n > 0 ? n : cfg.eval.n_generate, common.out);
    } else if (interp->parsed()) {
      run_interpolate(p, resolve_dataset(cfg, data_path), index_a, index_b, lambdas, common.out);
    } else if (manip->parsed()) {
      run_manipulate(p, resolve_dataset(cfg, data_path), strength, rows, common.out);
    } else if (eval->parsed()) {
      std::optional<LoadedPrior> prior;
      if (!prior_path.empty()) prior.emplace(load_prior(prior_path));
      run_eval(p, resolve_dataset(cfg, data_path), prior ? &prior->prior : nullptr, common.out);
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DegenerateLatentError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitOther;
  }
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace dbae
