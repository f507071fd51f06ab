// Copyright (C) 2026 The dbae authors
// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "dbae/eval.hpp"

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

double log_det_spd(const Mat& m, const char* what) {
  const Eigen::LLT<Mat> llt(m);
  if (llt.info() != Eigen::Success) throw ContractError(std::string("mi_bound_check: ") + what + " is not SPD");
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

Mat pseudo_inverse_sym(const Mat& m) {
  const Eigen::SelfAdjointEigenSolver<Mat> eig(m);
  const Eigen::VectorXd ev = eig.eigenvalues();
  const double tol = 1e-12 * std::max(1e-300, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv(ev.size());
  for (Eigen::Index i = 0; i < ev.size(); ++i) inv(i) = ev(i) > tol ? 1.0 / ev(i) : 0.0;
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

LinearGaussianInstance random_linear_gaussian_instance(RandomStream& rng, std::size_t d, std::size_t l) {
  Mat a(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal() / std::sqrt(static_cast<double>(d));
  LinearGaussianInstance inst;
  inst.data_cov = from_eigen(a * a.transpose() + 0.1 * Mat::Identity(a.rows(), a.cols()));
  inst.encoder = Tensor<double>::matrix(l, d);
  for (double& v : inst.encoder.values()) v = rng.normal();
  inst.encoder_noise = rng.uniform(0.05, 1.0);
  inst.decoder = Tensor<double>::matrix(d, l);
  for (double& v : inst.decoder.values()) v = rng.normal();
  inst.mismatch = rng.uniform(0.0, 0.5);
  return inst;
}

MiBoundResult mi_bound_check(const LinearGaussianInstance& inst, const BridgeKernel& kernel,
                             std::size_t quadrature_nodes) {
  const Mat sigma0 = to_eigen(inst.data_cov);
  const Mat enc = to_eigen(inst.encoder);
  const Mat dec = to_eigen(inst.decoder);
  const Eigen::Index d = sigma0.rows(), l = enc.rows();
  if (sigma0.cols() != d || enc.cols() != d || dec.rows() != d || dec.cols() != l)
    throw ContractError("mi_bound_check: inconsistent instance shapes");
  if (!(inst.encoder_noise > 0)) throw ContractError("mi_bound_check: encoder noise must be positive");
  if (quadrature_nodes < 3) throw ContractError("mi_bound_check: need at least 3 quadrature nodes");

  const double s2 = inst.encoder_noise * inst.encoder_noise;
  const double log_2pi_e = std::log(2.0 * std::numbers::pi * std::numbers::e);
  const Mat sigma_z = enc * sigma0 * enc.transpose() + s2 * Mat::Identity(l, l);
  const Mat sigma_end = dec * sigma_z * dec.transpose();
  const Mat cross = sigma0 * enc.transpose() * dec.transpose();  // Cov(x0, x_T)
  const Mat gain = cross * pseudo_inverse_sym(sigma_end);          // E[x0 | x_T] = gain x_T
  const Mat cond = sigma0 - gain * cross.transpose();              // Cov(x0 | x_T)

  MiBoundResult r;
  r.mi = 0.5 * (log_det_spd(sigma_z, "encoder covariance") - static_cast<double>(l) * std::log(s2));
  r.data_entropy = 0.5 * (static_cast<double>(d) * log_2pi_e + log_det_spd(sigma0, "data covariance"));
  r.cond_entropy = 0.5 * (static_cast<double>(d) * log_2pi_e + log_det_spd(cond, "posterior covariance"));

  // x_t | x_T ~ N((a gain + b) x_T, a^2 cond + var_hat I). The model's
  // posterior mean uses (1 + mismatch) gain, so its score residual is
  // -Q a mismatch gain x_T with Q the inverse covariance above.
  const Mat m = gain * sigma_end * gain.transpose();
  const double kappa2 = inst.mismatch * inst.mismatch;
  const Mat id = Mat::Identity(d, d);
  auto integrands = [&](double t) {
    const BridgeCoefficients c = kernel.coefficients(t);
    const double g2 = kernel.schedule().beta(t);
    const double a = c.mean_start;
    const Mat q = (a * a * cond + c.var_hat * id).inverse();
    const double sm = 0.5 * g2 * a * a * kappa2 * (q * m * q).trace();
    // E|s_cond - s_marg|^2 = d / var_hat - tr Q = tr(Q a^2 cond) / var_hat.
    const double gap = 0.5 * g2 * a * a * (q * cond).trace() / c.var_hat;
    return std::pair<double, double>{sm, gap};
  };

  // Simpson in u = log t resolves the 1/t growth of the denoising form.
  const std::size_t nodes = quadrature_nodes % 2 ? quadrature_nodes : quadrature_nodes + 1;
  const double u0 = std::log(kernel.t_min()), u1 = std::log(kernel.t_max());
  const double h = (u1 - u0) / static_cast<double>(nodes - 1);
  double sm_acc = 0, gap_acc = 0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const double t = i + 1 == nodes ? kernel.t_max() : std::exp(u0 + h * static_cast<double>(i));
    const double w = (i == 0 || i + 1 == nodes) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const auto [sm, gap] = integrands(t);
    sm_acc += w * sm * t;
    gap_acc += w * gap * t;
  }
  r.l_sm = sm_acc * h / 3.0;
  r.l_denoising_clamped = r.l_sm + gap_acc * h / 3.0;
  r.l_ae = r.l_sm + r.cond_entropy;
  r.lhs = -r.mi;
  r.rhs = r.l_ae - r.data_entropy;
  r.slack = r.rhs - r.lhs;
  const double tol = 1e-9 * (1.0 + std::abs(r.mi) + std::abs(r.data_entropy));
  r.holds = std::isfinite(r.slack) && r.slack >= -tol;
  return r;
}

}  // namespace dbae
