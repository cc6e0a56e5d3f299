#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fqr/estimators.hpp"
#include "fqr/quantile.hpp"

namespace fqr {

/// Monte Carlo decomposition of the integrated squared coefficient error.
/// All three terms average (1/M) ||. ||_F^2 discrepancies, so
/// mse = bias_sq + var holds exactly.
struct CoeffMse {
  double mse = 0.0;
  double bias_sq = 0.0;
  double var = 0.0;
  std::vector<double> per_rep;  // per-replication integrated squared error
};

CoeffMse coeff_mse(const std::vector<Eigen::MatrixXd>& estimates, const Eigen::MatrixXd& truth);
CoeffMse coeff_mse(const std::vector<CoefficientMatrix>& estimates,
                   const CoefficientMatrix& truth);

/// In-sample and out-of-sample prediction errors: the mean (unsquared)
/// 2-Wasserstein distance between observed and fitted quantile functions,
/// averaged over observations and replications. fits[b] pairs with
/// (train_x[b], train_q[b]); every fit is evaluated on the shared holdout.
struct PredErr {
  double pe_in = 0.0;
  double pe_out = 0.0;
};
PredErr prediction_error(const std::vector<FitResult>& fits,
                         const std::vector<DesignMatrix>& train_x,
                         const std::vector<QuantileMatrix>& train_q,
                         const DesignMatrix& holdout_x, const QuantileMatrix& holdout_q);

/// Per-observation root mean squared residual over the grid (equivalently the
/// 2-Wasserstein distance between matched rows).
std::vector<double> per_observation_rmse(const QuantileMatrix& truth,
                                         const QuantileMatrix& fitted);

/// Mean and sample standard deviation of the per-observation RMSEs.
struct RmseSummary {
  double mean = 0.0;
  double sd = 0.0;
};
RmseSummary residual_rmse(const QuantileMatrix& truth, const QuantileMatrix& fitted);

/// One method's aggregate over a Monte Carlo run. bias is reported on the
/// same (root) scale as rmse and sd; bias_sq is its square.
struct MonteCarloSummary {
  int b_reps = 0;
  double rmse = 0.0;     // sqrt of mse
  double bias = 0.0;     // sqrt of bias_sq
  double bias_sq = 0.0;
  double sd = 0.0;       // sqrt of var
  double pe_in = 0.0;
  double pe_out = 0.0;
  std::vector<double> per_rep;
};

MonteCarloSummary summarize_monte_carlo(const CoeffMse& mse, const PredErr& pe, int b_reps);

}  // namespace fqr
