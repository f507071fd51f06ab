// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include "dbae/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "dbae/log.hpp"

namespace dbae {

namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat to_eigen(const Tensor<double>& t) {
  const Tensor<double> m = t.as_matrix();
  return Eigen::Map<const RowMat>(m.data(), static_cast<Eigen::Index>(m.rows()),
                                  static_cast<Eigen::Index>(m.cols()));
}

Tensor<double> from_eigen(const Mat& m) {
  Tensor<double> out = Tensor<double>::matrix(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  Eigen::Map<RowMat>(out.data(), m.rows(), m.cols()) = m;
  return out;
}

Mat with_bias_column(const Tensor<double>& z) {
  const Mat zm = to_eigen(z);
  Mat x(zm.rows(), zm.cols() + 1);
  x << zm, Mat::Ones(zm.rows(), 1);
  return x;
}

double sigmoid(double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

}  // namespace

std::string to_string(ReconMetric metric) { return metric == ReconMetric::mse ? "mse" : "ssim_window"; }

ReconMetric recon_metric_from_string(const std::string& s) {
  if (s == "mse") return ReconMetric::mse;
  if (s == "ssim_window" || s == "ssim") return ReconMetric::ssim_window;
  throw ConfigError("unknown reconstruction metric '" + s + "'");
}

double ssim_image(std::span<const double> a, std::span<const double> b, const SsimOptions& opt) {
  const std::size_t n = opt.side, w = opt.window;
  if (a.size() != n * n || b.size() != n * n)
    throw ShapeError("ssim: expected " + std::to_string(n * n) + " pixels per image");
  if (w == 0 || w > n) throw ContractError("ssim: window must be in [1, side]");
  const double c1 = std::pow(0.01 * opt.data_range, 2), c2 = std::pow(0.03 * opt.data_range, 2);
  const double count = static_cast<double>(w * w);
  double total = 0;
  for (std::size_t r = 0; r + w <= n; ++r) {
    for (std::size_t c = 0; c + w <= n; ++c) {
      double ma = 0, mb = 0;
      for (std::size_t i = 0; i < w; ++i)
        for (std::size_t j = 0; j < w; ++j) ma += a[(r + i) * n + c + j], mb += b[(r + i) * n + c + j];
      ma /= count;
      mb /= count;
      double va = 0, vb = 0, cov = 0;
      for (std::size_t i = 0; i < w; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
          const double da = a[(r + i) * n + c + j] - ma, db = b[(r + i) * n + c + j] - mb;
          va += da * da, vb += db * db, cov += da * db;
        }
      }
      va /= count, vb /= count, cov /= count;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  const double windows = static_cast<double>((n - w + 1) * (n - w + 1));
  return total / windows;
}

double recon_error(const Tensor<double>& x0, const Tensor<double>& x0_hat, ReconMetric metric,
                   const SsimOptions& ssim) {
  require_same_shape(x0, x0_hat, "recon_error");
  const Tensor<double> a = x0.as_matrix(), b = x0_hat.as_matrix();
  if (metric == ReconMetric::mse) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s / static_cast<double>(a.size());
  }
  if (a.cols() != ssim.side * ssim.side)
    throw ContractError("recon_error: ssim_window needs " + std::to_string(ssim.side) + "x" +
                        std::to_string(ssim.side) + " grid data");
  double s = 0;
  for (std::size_t i = 0; i < a.rows(); ++i) s += ssim_image(a.row(i), b.row(i), ssim);
  return s / static_cast<double>(a.rows());
}

Tensor<double> ProbeModel::predict(const Tensor<double>& z) const {
  Mat out = to_eigen(z) * to_eigen(w);
  for (Eigen::Index k = 0; k < out.cols(); ++k) out.col(k).array() += b[static_cast<std::size_t>(k)];
  return from_eigen(out);
}

ProbeModel fit_probe_ridge(const Tensor<double>& z, const Tensor<double>& targets, double l2) {
  if (z.rows() != targets.rows()) throw ShapeError("fit_probe_ridge: row count mismatch");
  const Mat x = with_bias_column(z);
  const Mat y = to_eigen(targets);
  const Eigen::Index p = x.cols();
  Mat gram = x.transpose() * x;
  const double scale = std::max(gram.diagonal().head(p - 1).mean(), 1e-300);
  Eigen::FullPivLU<Mat> lu(gram);
  lu.setThreshold(1e-10);
  double lam = l2;
  if (lu.rank() < p) {
    log::warn("fit_probe_ridge: rank-deficient features, increasing the ridge penalty");
    lam = std::max(lam, 1e-3);
  }
  gram.diagonal().head(p - 1).array() += lam * scale;
  const Mat coef = gram.ldlt().solve(x.transpose() * y);
  ProbeModel m;
  m.kind = ProbeKind::ridge;
  m.w = from_eigen(coef.topRows(p - 1));
  m.b.resize(static_cast<std::size_t>(coef.cols()));
  for (Eigen::Index k = 0; k < coef.cols(); ++k) m.b[static_cast<std::size_t>(k)] = coef(p - 1, k);
  return m;
}

ProbeModel fit_probe_logistic(const Tensor<double>& z, const std::vector<double>& labels, double l2) {
  if (z.rows() != labels.size()) throw ShapeError("fit_probe_logistic: row count mismatch");
  const Mat x = with_bias_column(z);
  const Eigen::Index n = x.rows(), p = x.cols();
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(labels.data(), n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p, l2 * static_cast<double>(n));
  penalty(p - 1) = 0;
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd prob(n), weight(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      prob(i) = sigmoid(eta(i));
      weight(i) = std::max(prob(i) * (1 - prob(i)), 1e-12);
    }
    const Eigen::VectorXd grad = x.transpose() * (prob - y) + penalty.cwiseProduct(beta);
    Mat hess = x.transpose() * weight.asDiagonal() * x;
    hess.diagonal() += penalty + Eigen::VectorXd::Constant(p, 1e-10);
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    beta -= step;
    if (step.norm() < 1e-10 * (1 + beta.norm())) break;
  }
  ProbeModel m;
  m.kind = ProbeKind::logistic;
  m.w = from_eigen(beta.head(p - 1));
  m.b = {beta(p - 1)};
  return m;
}

double auroc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auroc: size mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(scores.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 0.5) pos += 1, rank_sum += rank[i];
    else neg += 1;
  }
  if (pos == 0 || neg == 0) throw ContractError("auroc: both classes must be present");
  return (rank_sum - pos * (pos + 1) / 2) / (pos * neg);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("pearson: need two equal-length series");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

ProbeScores probe_scores(const ProbeModel& model, const Tensor<double>& z, const std::vector<double>& labels) {
  const Tensor<double> out = model.predict(z);
  if (out.rows() != labels.size()) throw ShapeError("probe_scores: row count mismatch");
  std::vector<double> raw(out.rows()), pred(out.rows());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    raw[i] = out(i, 0);
    pred[i] = model.kind == ProbeKind::logistic ? sigmoid(raw[i]) : raw[i];
  }
  ProbeScores s;
  s.auroc = auroc(raw, labels);
  double se = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) se += (pred[i] - labels[i]) * (pred[i] - labels[i]);
  s.mse = se / static_cast<double>(pred.size());
  s.pearson_r = pearson(pred, labels);
  return s;
}

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ContractError("wasserstein_1d: empty point set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size(), m = b.size();
  // Quantile functions are step functions with jumps at i/n and j/m.
  std::size_t i = 0, j = 0, prev = 0;  // masses in units of 1/(n m)
  double acc = 0;
  while (i < n && j < m) {
    const std::size_t next_a = (i + 1) * m, next_b = (j + 1) * n;
    const std::size_t next = std::min(next_a, next_b);
    acc += static_cast<double>(next - prev) * (a[i] - b[j]) * (a[i] - b[j]);
    prev = next;
    if (next_a == next) ++i;
    if (next_b == next) ++j;
  }
  return std::sqrt(acc / static_cast<double>(n * m));
}

double sliced_wasserstein(const Tensor<double>& a, const Tensor<double>& b, std::size_t n_projections,
                          std::uint64_t seed) {
  const Tensor<double> am = a.as_matrix(), bm = b.as_matrix();
  if (am.cols() != bm.cols()) throw ShapeError("sliced_wasserstein: dimension mismatch");
  if (n_projections == 0) throw ContractError("sliced_wasserstein: need at least one projection");
  const std::size_t d = am.cols();
  RandomStream rng(seed);
  std::vector<double> u(d), pa(am.rows()), pb(bm.rows());
  double total = 0;
  for (std::size_t p = 0; p < n_projections; ++p) {
    double norm = 0;
    do {
      norm = 0;
      for (double& v : u) v = rng.normal(), norm += v * v;
    } while (norm == 0);
    norm = std::sqrt(norm);
    for (double& v : u) v /= norm;
    for (std::size_t i = 0; i < am.rows(); ++i) {
      pa[i] = 0;
      for (std::size_t k = 0; k < d; ++k) pa[i] += am(i, k) * u[k];
    }
    for (std::size_t i = 0; i < bm.rows(); ++i) {
      pb[i] = 0;
      for (std::size_t k = 0; k < d; ++k) pb[i] += bm(i, k) * u[k];
    }
    total += wasserstein_1d(pa, pb);
  }
  return total / static_cast<double>(n_projections);
}

LatentStats latent_stats(const Tensor<double>& z) {
  const Mat zm = to_eigen(z);
  const Eigen::Index n = zm.rows(), l = zm.cols();
  if (n < l + 1) throw ContractError("latent_stats: need at least l + 1 samples");
  const Eigen::RowVectorXd mean = zm.colwise().mean();
  const Mat centered = zm.rowwise() - mean;
  const Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);
  LatentStats s;
  s.mean.assign(mean.data(), mean.data() + l);
  for (Eigen::Index k = 0; k < l; ++k) s.std.push_back(std::sqrt(cov(k, k)));
  s.covariance = from_eigen(cov);

  // Correlation matrix keeps the eigenvalue threshold scale free.
  Eigen::VectorXd inv_sd(l);
  for (Eigen::Index k = 0; k < l; ++k) inv_sd(k) = cov(k, k) > 0 ? 1.0 / std::sqrt(cov(k, k)) : 0.0;
  const Mat corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Mat> eig(corr);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  double log_det = 0;
  bool singular = false;
  for (Eigen::Index k = 0; k < l; ++k) {
    if (ev(k) > tol) log_det += std::log(ev(k));
    else singular = true;
  }
  if (singular) log::warn("latent_stats: singular covariance, using the pseudo-determinant");
  s.gaussian_tc = -0.5 * log_det;
  return s;
}

void append_eval_report(const std::string& path, const std::vector<EvalRow>& rows,
                        const std::string& config_hash, std::uint64_t seed) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot open " + path + " for writing");
  if (fresh) out << "metric,value,config_hash,seed\n";
  out.precision(std::numeric_limits<double>::max_digits10);
  for (const EvalRow& r : rows) out << r.metric << ',' << r.value << ',' << config_hash << ',' << seed << '\n';
}

}  // namespace dbae
