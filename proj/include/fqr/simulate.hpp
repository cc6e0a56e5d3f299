#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "fqr/design.hpp"
#include "fqr/estimators.hpp"
#include "fqr/quantile.hpp"
#include "fqr/rng.hpp"

namespace fqr {

/// How the common multiplier of the true coefficient functions shrinks with
/// the covariate dimension.
enum class ScaleMode { InvP, InvSqrtP };

inline const char* to_string(ScaleMode s) { return s == ScaleMode::InvP ? "inv_p" : "inv_sqrt_p"; }

/// Quantile-warping design: covariates from a Gaussian AR(1) copula, true
/// coefficient functions spanned by centered Beta CDFs, responses produced by
/// warping the conditional quantile function through a random Beta-CDF
/// mixture.
struct WarpingConfig {
  int n = 50;
  int p = 25;
  int r_true = 5;   // basis family size; the true coefficient rank
  int m_grid = 100;
  double rho = 0.9;  // AR(1) parameter of the latent Gaussian copula
  int k_warp = 50;   // response warp mixes k_warp + 1 Beta CDFs
  ScaleMode scale_mode = ScaleMode::InvP;
  std::uint64_t seed = 0;
};

/// Latent-factor design: rows are a common baseline plus a K-factor linear
/// term in the covariates plus noise, then monotone-rearranged into valid
/// quantile functions.
struct FactorConfig {
  int n = 100;
  int p = 50;
  int m_quantiles = 100;
  int k_factors = 2;
  /// Pre-rearrangement cell noise. Rearrangement absorbs a large share of
  /// independent cell noise, so this is set well above the residual scale
  /// the fitted models end up seeing.
  double noise_sd = 2.0;
  std::uint64_t seed = 0;
};

struct SimulatedDataset {
  DesignMatrix x;
  QuantileMatrix q;
  CoefficientMatrix true_b;
  Eigen::VectorXd true_intercept;
  /// Conditional model part before response noise/warping (one row per
  /// observation); pseudo-errors are q.values - latent_quantiles.
  Eigen::MatrixXd latent_quantiles;
  /// Rows pulled back into the valid quantile set (clamp to [0, 1] plus
  /// monotone rearrangement). Rare for the warping design, where only an
  /// extreme covariate draw can overrun the unit interval's slope budget.
  int repair_count = 0;
  std::string design;  // "warping" or "factor"
  /// Centering point of the true linear model (population covariate mean).
  double true_center = 0.0;
};

/// Latent AR(1) standard normal matrix: Z_1 = eta_1,
/// Z_j = rho Z_{j-1} + sqrt(1-rho^2) eta_j, giving Cov(Z_j, Z_k) = rho^|j-k|.
Eigen::MatrixXd gen_ar1_normals(int n, int p, double rho, Rng& rng);

/// Copula covariates X = Phi(Z) with Z from gen_ar1_normals; entries are
/// uniform on (0, 1) with AR-decaying dependence.
DesignMatrix gen_copula_covariates(int n, int p, double rho, std::uint64_t seed);

/// Regularized incomplete beta function I_u(a, b) for positive integer
/// parameters (the Beta(a, b) CDF at u).
double incomplete_beta_cdf(double u, int a, int b);

/// Centered Beta-CDF basis element: I_u(k+1, r-k+1) - u for 0 <= k <= r.
/// The r+1 elements sum to zero pointwise, so the family spans an
/// r-dimensional space.
double beta_basis(double u, int k, int r);

/// Per-covariate mixing coefficients of the warping design (p rows, each a
/// flat Dirichlet draw over r_true + 1 components). Drawn once and passed to
/// every replication so the truth is fixed across a Monte Carlo run.
struct WarpingCoefficients {
  Eigen::MatrixXd c;  // p x (r_true + 1)
};
WarpingCoefficients draw_warping_coefficients(int p, int r_true, std::uint64_t seed);

/// True coefficient matrix scale * C * G with G the centered Beta-CDF basis
/// evaluated on the grid.
Eigen::MatrixXd warping_true_b(const WarpingCoefficients& coeffs, int r_true,
                               const QuantileGrid& grid, int p, ScaleMode scale_mode);

/// Warps one conditional quantile row q through the Beta-CDF mixture with
/// weights w (size k_warp + 1): sum_k w_k * I_q(k+1, k_warp - k + 1).
Eigen::VectorXd warp_response_row(const Eigen::VectorXd& q, const std::vector<double>& w);

SimulatedDataset gen_warping_dataset(const WarpingConfig& cfg);
SimulatedDataset gen_warping_dataset(const WarpingConfig& cfg, const WarpingCoefficients& coeffs);

/// Frozen parameters of the factor design: increasing baseline mu, factor
/// curves sigma (K x m), and the covariate loading matrix (p x K) linking
/// X to the factor scores.
struct FactorModel {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd loadings;
};
FactorModel draw_factor_model(const FactorConfig& cfg);

SimulatedDataset gen_factor_dataset(const FactorConfig& cfg);
SimulatedDataset gen_factor_dataset(const FactorConfig& cfg, const FactorModel& model);

}  // namespace fqr
