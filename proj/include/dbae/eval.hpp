// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dbae/bridge.hpp"
#include "dbae/random.hpp"
#include "dbae/tensor.hpp"

namespace dbae {

enum class ReconMetric { mse, ssim_window };

struct SsimOptions {
  std::size_t side = 8;    // images are side x side, row-major
  std::size_t window = 3;  // uniform window, valid positions only
  double data_range = 1.0;
};

/// Batch mean of per-sample MSE (mean over features) or windowed SSIM.
double recon_error(const Tensor<double>& x0, const Tensor<double>& x0_hat, ReconMetric metric,
                   const SsimOptions& ssim = {});
/// Mean SSIM of one image pair.
double ssim_image(std::span<const double> a, std::span<const double> b, const SsimOptions& opt);

enum class ProbeKind { ridge, logistic };

/// Affine read-out y_hat = z w + b, w is (l x k).
struct ProbeModel {
  ProbeKind kind = ProbeKind::ridge;
  Tensor<double> w;
  std::vector<double> b;

  /// Raw affine output (logits for the logistic probe), n x k.
  Tensor<double> predict(const Tensor<double>& z) const;
};

/// Ridge on targets (n x k). The bias is not penalized; `l2` is relative to
/// the mean feature variance. Rank-deficient features fall back to a larger
/// ridge with a warning.
ProbeModel fit_probe_ridge(const Tensor<double>& z, const Tensor<double>& targets, double l2 = 1e-10);
/// Binary logistic regression (labels in {0, 1}) by Newton's method.
ProbeModel fit_probe_logistic(const Tensor<double>& z, const std::vector<double>& labels, double l2 = 1e-4);

struct ProbeScores {
  double auroc = 0;
  double mse = 0;
  double pearson_r = 0;
};

/// Scores of the first output column against labels. AUROC needs both
/// classes; mse compares probabilities (logistic) or raw outputs (ridge).
ProbeScores probe_scores(const ProbeModel& model, const Tensor<double>& z, const std::vector<double>& labels);

/// Area under the ROC curve with average ranks for ties.
double auroc(std::span<const double> scores, std::span<const double> labels);
double pearson(std::span<const double> a, std::span<const double> b);

/// Mean over random unit directions of the 1-D Wasserstein-2 distance between
/// the projected point sets. Directions come from `seed`.
double sliced_wasserstein(const Tensor<double>& a, const Tensor<double>& b, std::size_t n_projections,
                          std::uint64_t seed = 0);
/// Exact W2 between two 1-D empirical distributions.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

struct LatentStats {
  std::vector<double> mean;
  std::vector<double> std;
  Tensor<double> covariance;  // l x l, unbiased
  double gaussian_tc = 0;     // 1/2 (sum log S_ii - log det S)
};

LatentStats latent_stats(const Tensor<double>& z);

struct EvalRow {
  std::string metric;
  double value = 0;
};
/// Appends rows (metric, value, config_hash, seed), writing a header first
/// when the file is new.
void append_eval_report(const std::string& path, const std::vector<EvalRow>& rows,
                        const std::string& config_hash, std::uint64_t seed);

/// Jointly Gaussian autoencoder with a closed-form bridge score:
/// x0 ~ N(0, data_cov), z = encoder x0 + N(0, encoder_noise^2 I), x_T = decoder z.
struct LinearGaussianInstance {
  Tensor<double> data_cov;  // d x d, SPD
  Tensor<double> encoder;   // l x d
  double encoder_noise = 0.1;
  Tensor<double> decoder;   // d x l
  /// The model's posterior-mean gain E[x0 | x_T] is off by this factor;
  /// 0 gives the optimal score.
  double mismatch = 0.0;
};

LinearGaussianInstance random_linear_gaussian_instance(RandomStream& rng, std::size_t d, std::size_t l);

struct MiBoundResult {
  double mi = 0;            // MI(x0, z)
  double data_entropy = 0;  // H(x0)
  double cond_entropy = 0;  // H(x0 | x_T)
  double l_sm = 0;          // score matching against the marginal bridge score
  double l_ae = 0;          // l_sm + cond_entropy
  double lhs = 0;           // -MI
  double rhs = 0;           // l_ae - H
  double slack = 0;         // rhs - lhs
  bool holds = false;
  /// Denoising (pinned-endpoint) form on [eps_t T, (1 - eps_t) T]; it grows
  /// like log(1 / eps_t) and is reported for comparison only.
  double l_denoising_clamped = 0;
};

/// Throws ContractError unless the instance is a valid linear-Gaussian model
/// (SPD data covariance, positive encoder noise, consistent shapes).
MiBoundResult mi_bound_check(const LinearGaussianInstance& instance, const BridgeKernel& kernel,
                             std::size_t quadrature_nodes = 4001);

std::string to_string(ReconMetric metric);
ReconMetric recon_metric_from_string(const std::string& s);

}  // namespace dbae
