#include "fqr/metrics.hpp"

#include <cmath>

#include "fqr/errors.hpp"

namespace fqr {

CoeffMse coeff_mse(const std::vector<Eigen::MatrixXd>& estimates, const Eigen::MatrixXd& truth) {
  if (estimates.empty()) throw InvalidInput("coeff_mse: no estimates");
  const double m = static_cast<double>(truth.cols());
  Eigen::MatrixXd mean_est = Eigen::MatrixXd::Zero(truth.rows(), truth.cols());
  CoeffMse out;
  out.per_rep.reserve(estimates.size());
  for (const auto& est : estimates) {
    if (est.rows() != truth.rows() || est.cols() != truth.cols())
      throw InvalidInput("coeff_mse: estimate shape does not match the truth");
    const double err = (est - truth).squaredNorm() / m;
    out.per_rep.push_back(err);
    out.mse += err;
    mean_est += est;
  }
  const double b = static_cast<double>(estimates.size());
  out.mse /= b;
  mean_est /= b;
  out.bias_sq = (mean_est - truth).squaredNorm() / m;
  // var computed against the Monte Carlo mean; mse = bias_sq + var exactly.
  out.var = 0.0;
  for (const auto& est : estimates) out.var += (est - mean_est).squaredNorm() / m;
  out.var /= b;
  return out;
}

CoeffMse coeff_mse(const std::vector<CoefficientMatrix>& estimates,
                   const CoefficientMatrix& truth) {
  std::vector<Eigen::MatrixXd> raw;
  raw.reserve(estimates.size());
  for (const auto& est : estimates) {
    if (est.grid != truth.grid) throw GridMismatch("coeff_mse: estimate grid differs from truth");
    raw.push_back(est.b);
  }
  return coeff_mse(raw, truth.b);
}

PredErr prediction_error(const std::vector<FitResult>& fits,
                         const std::vector<DesignMatrix>& train_x,
                         const std::vector<QuantileMatrix>& train_q,
                         const DesignMatrix& holdout_x, const QuantileMatrix& holdout_q) {
  if (fits.empty() || fits.size() != train_x.size() || fits.size() != train_q.size())
    throw InvalidInput("prediction_error: fits and training data must pair up");
  PredErr out;
  for (std::size_t b = 0; b < fits.size(); ++b) {
    const auto& fit = fits[b];
    const auto& xb = train_x[b];
    const auto& qb = train_q[b];
    if (xb.n() != qb.n()) throw InvalidInput("prediction_error: mismatched training pair");
    double acc = 0.0;
    for (int i = 0; i < xb.n(); ++i)
      acc += wasserstein2(qb.row(i), predict(fit, xb.x().row(i).transpose()).quantiles);
    out.pe_in += acc / static_cast<double>(xb.n());

    double acc_out = 0.0;
    for (int i = 0; i < holdout_x.n(); ++i)
      acc_out +=
          wasserstein2(holdout_q.row(i), predict(fit, holdout_x.x().row(i).transpose()).quantiles);
    out.pe_out += acc_out / static_cast<double>(holdout_x.n());
  }
  out.pe_in /= static_cast<double>(fits.size());
  out.pe_out /= static_cast<double>(fits.size());
  return out;
}

std::vector<double> per_observation_rmse(const QuantileMatrix& truth,
                                         const QuantileMatrix& fitted) {
  if (truth.grid != fitted.grid) throw GridMismatch("per_observation_rmse: grids differ");
  if (truth.n() != fitted.n()) throw InvalidInput("per_observation_rmse: shapes differ");
  std::vector<double> out(static_cast<std::size_t>(truth.n()));
  const double m = static_cast<double>(truth.m());
  for (int i = 0; i < truth.n(); ++i)
    out[static_cast<std::size_t>(i)] =
        std::sqrt((truth.values.row(i) - fitted.values.row(i)).squaredNorm() / m);
  return out;
}

RmseSummary residual_rmse(const QuantileMatrix& truth, const QuantileMatrix& fitted) {
  const auto per_obs = per_observation_rmse(truth, fitted);
  RmseSummary s;
  for (double v : per_obs) s.mean += v;
  s.mean /= static_cast<double>(per_obs.size());
  if (per_obs.size() > 1) {
    double ss = 0.0;
    for (double v : per_obs) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(per_obs.size() - 1));
  }
  return s;
}

MonteCarloSummary summarize_monte_carlo(const CoeffMse& mse, const PredErr& pe, int b_reps) {
  MonteCarloSummary s;
  s.b_reps = b_reps;
  s.rmse = std::sqrt(mse.mse);
  s.bias_sq = mse.bias_sq;
  s.bias = std::sqrt(mse.bias_sq);
  s.sd = std::sqrt(mse.var);
  s.pe_in = pe.pe_in;
  s.pe_out = pe.pe_out;
  s.per_rep = mse.per_rep;
  return s;
}

}  // namespace fqr
