#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fqr/design.hpp"
#include "fqr/prox.hpp"
#include "fqr/quantile.hpp"

namespace fqr {

/// Discretized coefficient matrix: row j holds the coefficient function of
/// covariate j evaluated on the grid.
struct CoefficientMatrix {
  Eigen::MatrixXd b;  // p x M
  QuantileGrid grid;
  std::optional<int> rank_cap;  // rank constraint the fit was run with, if any
};

enum class InitMode {
  Random,   ///< i.i.d. U[-0.01, 0.01] entries, seeded
  WarmOls,  ///< rank-truncated least-squares solution
};

/// Degrees-of-freedom convention used by the information criteria.
enum class DfMode {
  NonzeroCount,  ///< number of entries of B exceeding 1e-8 in magnitude
  ManifoldDim,   ///< r * (p + M - r) with r the numerical rank of the fit
};

struct SolverConfig {
  ProxConfig prox;
  int max_iters = 1000;
  double tol = 1e-6;          // relative Frobenius change that counts as converged
  double step_init = 0.0;     // 0 selects 1/L with L the smooth-loss Lipschitz constant
  double backtrack_factor = 0.5;
  std::uint64_t seed = 0;
  InitMode init = InitMode::Random;
  DfMode df_mode = DfMode::NonzeroCount;
  std::vector<double> weights;  // per-observation loss weights; empty = all ones

  void validate(int n, int p, int m) const;
};

struct FitResult {
  Eigen::VectorXd intercept;       // grid-wise mean quantile function
  CoefficientMatrix coefficients;  // fitted B
  Eigen::VectorXd column_means;    // covariate means used for centering
  int iterations = 0;
  bool converged = true;
  std::vector<double> objective_trace;  // penalized objective after each accepted step
  double step_size_final = 0.0;
  double df = 0.0;
  bool pseudoinverse_used = false;  // least squares fell back to a pseudoinverse
  int objective_increases = 0;      // accepted steps where the objective rose
  std::vector<std::string> warnings;
  std::string method;  // "ols" or "lowrank"
};

struct Prediction {
  QuantileVector quantiles;
  int rearranged_positions = 0;  // entries moved by the monotone rearrangement
};

/// Unpenalized least-squares fit: intercept = column means of Q, coefficients
/// solve the normal equations of the centered design. A rank-deficient design
/// is handled with an eigenvalue-truncated pseudoinverse (minimum-norm
/// solution) and flagged via pseudoinverse_used.
FitResult fit_ols(const DesignMatrix& x, const QuantileMatrix& q);

/// Penalized low-rank fit by proximal gradient descent: gradient step on the
/// smooth loss (n*M)^-1 ||Qc - Xc B||_F^2, soft-threshold and fused (total
/// variation) proximal steps, then projection onto the rank constraint by
/// truncated SVD. Backtracking halves the step while the smooth-loss
/// sufficient-decrease condition fails; convergence is declared on the
/// relative Frobenius change of the iterate after the rank projection.
FitResult fit_lowrank(const DesignMatrix& x, const QuantileMatrix& q, const SolverConfig& cfg);

/// Predicted quantile function at a new covariate vector, with monotone
/// rearrangement applied (and reported) so the output is a valid quantile
/// function.
Prediction predict(const FitResult& fit, const Eigen::VectorXd& x_new);

/// Number of singular values above rel_tol times the largest one. The zero
/// matrix has rank 0.
int numerical_rank(const Eigen::MatrixXd& b, double rel_tol = 1e-8);

/// Smallest eigenvalue of (1/n) D^T D for a (centered) design block D: the
/// restricted-strong-convexity curvature bound. Nonpositive values signal a
/// singular design.
double rsc_smallest_eigenvalue(const Eigen::MatrixXd& d, int n_obs);

/// rsc_smallest_eigenvalue of the centered design of x.
double rsc_diagnostic(const DesignMatrix& x);

}  // namespace fqr
