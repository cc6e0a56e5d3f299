#pragma once

#include <Eigen/Dense>

#include "fqr/errors.hpp"

namespace fqr {

/// Penalty configuration of the proximal solver. The lambdas multiply the raw
/// (unnormalized) penalties: lambda_l1 * sum |b_jm| and, per coefficient row,
/// lambda_fused * sum_m |b_jm - b_j,m-1|, alongside the per-sample smooth loss
/// (n*M)^-1 ||Qc - Xc B||_F^2. An objective whose penalties carry a 1/M factor
/// corresponds to dividing the lambdas by M.
struct ProxConfig {
  double lambda_l1 = 0.0;
  double lambda_fused = 0.0;
  int rank = 1;

  void validate(int p, int m) const;
};

/// Elementwise soft threshold: sign(v) * max(|v| - gamma, 0).
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& v, double gamma);

/// Exact solution of the 1D total-variation proximal problem
///   argmin_x 0.5 * ||x - v||^2 + gamma * sum_i |x_{i+1} - x_i|
/// via a direct forward scan (taut-string equivalent, O(M) typical).
Eigen::VectorXd fused_prox_row(const Eigen::VectorXd& v, double gamma);

/// Applies fused_prox_row independently to each matrix row.
Eigen::MatrixXd fused_prox(const Eigen::MatrixXd& b, double gamma);

/// Nearest matrix of rank at most `rank` in Frobenius norm: keeps the top
/// `rank` singular triplets. rank must lie in [1, min(rows, cols)]; at full
/// rank the input is returned unchanged.
Eigen::MatrixXd svd_truncate(const Eigen::MatrixXd& b, int rank);

}  // namespace fqr
