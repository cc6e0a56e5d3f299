#pragma once

#include <string>
#include <vector>

#include "fqr/estimators.hpp"

namespace fqr {

enum class Criterion { SAic, SBic };

/// Sample-size convention for the BIC's log(n) factor.
enum class BicSampleSize {
  Observations,    ///< n distributional observations (default)
  TotalResiduals,  ///< n * M scalar residuals
};

/// One tuning-grid cell: penalty triple plus its fitted criteria and weights.
struct CriterionCell {
  double lambda_l1 = 0.0;
  double lambda_fused = 0.0;
  int rank = 1;
  double loglik = 0.0;
  double df = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double saic = 0.0;
  double sbic = 0.0;
  bool perfect_fit = false;  // zero residual sum of squares
  bool failed = false;       // the fit threw; criteria are unusable
  std::string error;
};

struct TuningReport {
  std::vector<CriterionCell> cells;
  int selected_index = -1;
  Criterion criterion_used = Criterion::SAic;
};

/// Profile Gaussian log-likelihood -(n/2) * (log(2*pi*sigma^2) + 1) with
/// sigma^2 = rss / n over n scalar residuals. rss == 0 returns +infinity
/// (perfect fit).
double gaussian_loglik(double rss, long n_obs_total);

/// Smoothed model weights: softmax of -criterion/2, computed shift-invariantly.
/// Cells with NaN criteria get weight zero; -infinity criteria (perfect fits)
/// absorb all weight, split evenly among themselves.
std::vector<double> smoothed_weights(const std::vector<double>& criteria);

struct TuneOptions {
  Criterion criterion = Criterion::SAic;
  BicSampleSize bic_n = BicSampleSize::Observations;
  int threads = 1;
};

/// Fits every cell of the penalty grid (cell k runs with seed base.seed XOR k),
/// computes AIC/BIC and their smoothed weights over the grid, and selects the
/// cell with the largest weight (ties break to the lowest index). Cells whose
/// fits throw are recorded as failed with zero weight; if every cell fails,
/// TuningFailed is thrown with the per-cell errors.
TuningReport tune(const DesignMatrix& x, const QuantileMatrix& q,
                  const std::vector<ProxConfig>& grid, const SolverConfig& base,
                  const TuneOptions& opts = {});

/// tune() variant that also returns the selected cell's fit, avoiding a refit.
struct TuneOutcome {
  TuningReport report;
  FitResult best;
};
TuneOutcome tune_with_fit(const DesignMatrix& x, const QuantileMatrix& q,
                          const std::vector<ProxConfig>& grid, const SolverConfig& base,
                          const TuneOptions& opts = {});

}  // namespace fqr
