#pragma once

#include <cstdint>
#include <vector>

#include "fqr/estimators.hpp"
#include "fqr/metrics.hpp"
#include "fqr/selection.hpp"
#include "fqr/simulate.hpp"

namespace fqr {

/// Solver settings the Monte Carlo benchmarks use unless overridden:
/// least-squares warm start and a tolerance suited to the long, flat descent
/// tails of strongly correlated designs.
SolverConfig benchmark_solver_defaults();

/// Monte Carlo benchmark of the warping design: B replications of the same
/// latent model (coefficient mixtures frozen across replications), each fitted
/// by the penalized low-rank solver with information-criterion tuning and by
/// unpenalized least squares, evaluated against the shared truth and a shared
/// holdout sample.
struct WarpingBenchConfig {
  int r_true = 5;
  int n = 50;
  int p = 25;  // the reference tables use p = n/2
  int b_reps = 50;
  int m_grid = 100;
  double rho = 0.9;
  int k_warp = 50;
  ScaleMode scale_mode = ScaleMode::InvSqrtP;
  int holdout_n = 200;
  Criterion criterion = Criterion::SAic;
  /// l1 ladder as fractions of the data-driven lambda_max (the sup-norm of
  /// the smooth-loss gradient at B = 0, above which the l1 solution is all
  /// zeros). The floor sits at a tenth of lambda_max: far below that the
  /// near-dense fits overfit the in-sample residual enough to distort the
  /// information criteria at these sample sizes.
  std::vector<double> l1_fractions{0.1, 0.2, 0.35, 0.5};
  /// fused ladder as fractions of the analogous cumulative-gradient bound
  /// (above it each coefficient row collapses to a constant).
  std::vector<double> fused_fractions{0.0, 0.002, 0.01, 0.05};
  SolverConfig solver = benchmark_solver_defaults();  // prox filled per cell
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct WarpingCellResult {
  MonteCarloSummary lrk;
  MonteCarloSummary ols;
  /// Data-driven ladder anchors of the first replication (diagnostics).
  double lambda_max = 0.0;
  double fused_max = 0.0;
  /// Tuning-grid index selected in each replication.
  std::vector<int> selected_cells;
  /// Replications whose tuning failed outright; they are excluded from the
  /// aggregates and the run continues.
  int failed_reps = 0;
};

/// Ladder anchors computed from the gradient of the smooth loss at B = 0:
/// first the sup-norm bound for the l1 penalty, second the centered
/// cumulative-sum bound for the fused penalty.
std::pair<double, double> penalty_anchors(const DesignMatrix& x, const QuantileMatrix& q);

WarpingCellResult run_warping_cell(const WarpingBenchConfig& cfg);

/// Monte Carlo benchmark of the latent-factor design: the proposed penalized
/// low-rank fit against ordinary least squares, reporting pooled
/// per-observation residual RMSE on the training sample and on an independent
/// test sample of the same size.
struct FactorBenchConfig {
  int n = 100;
  int p = 50;
  int m_quantiles = 100;
  int k_factors = 2;
  double noise_sd = 2.0;
  int rank = 2;
  /// l1 penalty on the per-observation averaged loss; the solver (which
  /// averages over n * M scalar residuals) receives lambda / n.
  double lambda = 0.01;
  double lambda_fused = 0.0;
  int b_reps = 20;
  SolverConfig solver = benchmark_solver_defaults();
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

struct FactorMethodResult {
  RmseSummary train;  // pooled per-observation RMSE over all replications
  RmseSummary test;
  bool pseudoinverse_used = false;  // any replication fell back (least squares)
  bool all_converged = true;        // every replication converged (low rank)
};

struct FactorCellResult {
  FactorMethodResult proposed;
  FactorMethodResult ordinary;
  int failed_reps = 0;
};

FactorCellResult run_factor_cell(const FactorBenchConfig& cfg);

}  // namespace fqr
