#include "fqr/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>

#include "fqr/errors.hpp"
#include "fqr/parallel.hpp"
#include "fqr/rng.hpp"

namespace fqr {

namespace {

constexpr std::uint64_t kCoeffStream = 1;
constexpr std::uint64_t kHoldoutStream = 2;
constexpr std::uint64_t kTrainStream = 1000;
constexpr std::uint64_t kTestStream = 5000;

/// Fitted quantile matrix at the rows of x, with each prediction passed
/// through the monotone rearrangement exactly as predict() delivers it.
QuantileMatrix predict_matrix(const FitResult& fit, const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd values(n, fit.coefficients.b.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    values.row(i) = predict(fit, x.row(i).transpose()).quantiles.values.transpose();
  return QuantileMatrix(fit.coefficients.grid, std::move(values));
}

RmseSummary pool_rmse(const std::vector<std::vector<double>>& per_rep) {
  std::vector<double> pooled;
  for (const auto& v : per_rep) pooled.insert(pooled.end(), v.begin(), v.end());
  if (pooled.empty()) return {};
  double mean = 0.0;
  for (double r : pooled) mean += r;
  mean /= static_cast<double>(pooled.size());
  double ss = 0.0;
  for (double r : pooled) ss += (r - mean) * (r - mean);
  const double sd =
      pooled.size() > 1 ? std::sqrt(ss / static_cast<double>(pooled.size() - 1)) : 0.0;
  return RmseSummary{mean, sd};
}

}  // namespace

SolverConfig benchmark_solver_defaults() {
  SolverConfig s;
  s.init = InitMode::WarmOls;
  s.max_iters = 3000;
  s.tol = 1e-5;
  return s;
}

void WarpingBenchConfig::validate() const {
  if (n < 2 || p < 1 || r_true < 0 || m_grid < 2 || b_reps < 1 || holdout_n < 1)
    throw InvalidInput("warping benchmark: n, p, m_grid, b_reps and holdout_n must be positive");
  if (!(rho > -1.0 && rho < 1.0)) throw InvalidInput("warping benchmark: rho must be in (-1, 1)");
  if (l1_fractions.empty() || fused_fractions.empty())
    throw InvalidInput("warping benchmark: tuning ladders must be nonempty");
  for (double f : l1_fractions)
    if (!(f >= 0.0)) throw InvalidInput("warping benchmark: l1 fractions must be >= 0");
  for (double f : fused_fractions)
    if (!(f >= 0.0)) throw InvalidInput("warping benchmark: fused fractions must be >= 0");
  if (threads < 1) throw InvalidInput("warping benchmark: threads must be >= 1");
}

std::pair<double, double> penalty_anchors(const DesignMatrix& x, const QuantileMatrix& q) {
  const double n = static_cast<double>(x.n());
  const double m = static_cast<double>(q.m());
  Eigen::MatrixXd qc = q.values.rowwise() - q.values.colwise().mean();
  Eigen::MatrixXd grad0 = -2.0 / (n * m) * (x.centered().transpose() * qc);
  const double lambda_max = grad0.cwiseAbs().maxCoeff();
  double fused_max = 0.0;
  for (Eigen::Index j = 0; j < grad0.rows(); ++j) {
    const double row_mean = grad0.row(j).mean();
    double cum = 0.0;
    for (Eigen::Index k = 0; k < grad0.cols(); ++k) {
      cum += grad0(j, k) - row_mean;
      fused_max = std::max(fused_max, std::abs(cum));
    }
  }
  return {lambda_max, fused_max};
}

WarpingCellResult run_warping_cell(const WarpingBenchConfig& cfg) {
  cfg.validate();

  WarpingConfig base;
  base.n = cfg.n;
  base.p = cfg.p;
  base.r_true = cfg.r_true;
  base.m_grid = cfg.m_grid;
  base.rho = cfg.rho;
  base.k_warp = cfg.k_warp;
  base.scale_mode = cfg.scale_mode;

  const WarpingCoefficients coeffs =
      draw_warping_coefficients(cfg.p, cfg.r_true, mix_seed(cfg.seed, kCoeffStream));

  WarpingConfig holdout_cfg = base;
  holdout_cfg.n = cfg.holdout_n;
  holdout_cfg.seed = mix_seed(cfg.seed, kHoldoutStream);
  const SimulatedDataset holdout = gen_warping_dataset(holdout_cfg, coeffs);
  const CoefficientMatrix& truth = holdout.true_b;

  const int b_reps = cfg.b_reps;
  std::vector<std::optional<FitResult>> lrk_fits(static_cast<std::size_t>(b_reps));
  std::vector<std::optional<FitResult>> ols_fits(static_cast<std::size_t>(b_reps));
  std::vector<DesignMatrix> train_x;
  std::vector<QuantileMatrix> train_q;
  train_x.reserve(static_cast<std::size_t>(b_reps));
  train_q.reserve(static_cast<std::size_t>(b_reps));
  // Placeholders so parallel workers can assign by index; replaced in order.
  std::vector<int> selected(static_cast<std::size_t>(b_reps), -1);
  std::vector<double> anchors_l1(static_cast<std::size_t>(b_reps), 0.0);
  std::vector<double> anchors_fused(static_cast<std::size_t>(b_reps), 0.0);
  std::vector<std::string> rep_errors(static_cast<std::size_t>(b_reps));

  // Datasets are generated sequentially (cheap) so the per-replication fits
  // can run in parallel over immutable inputs.
  std::vector<SimulatedDataset> datasets;
  datasets.reserve(static_cast<std::size_t>(b_reps));
  for (int b = 0; b < b_reps; ++b) {
    WarpingConfig rep_cfg = base;
    rep_cfg.seed = mix_seed(cfg.seed, kTrainStream + static_cast<std::uint64_t>(b));
    datasets.push_back(gen_warping_dataset(rep_cfg, coeffs));
  }

  parallel_for(b_reps, cfg.threads, [&](int b) {
    const auto bi = static_cast<std::size_t>(b);
    const SimulatedDataset& ds = datasets[bi];
    try {
      ols_fits[bi] = fit_ols(ds.x, ds.q);

      const auto [l1_anchor, fused_anchor] = penalty_anchors(ds.x, ds.q);
      anchors_l1[bi] = l1_anchor;
      anchors_fused[bi] = fused_anchor;

      std::vector<ProxConfig> grid;
      grid.reserve(cfg.l1_fractions.size() * cfg.fused_fractions.size());
      for (double fl : cfg.l1_fractions)
        for (double ff : cfg.fused_fractions)
          grid.push_back(
              ProxConfig{fl * l1_anchor, ff * fused_anchor,
                         std::max(1, std::min(cfg.r_true, std::min(cfg.p, cfg.m_grid)))});

      SolverConfig solver = cfg.solver;
      solver.seed = mix_seed(cfg.seed, kTrainStream + static_cast<std::uint64_t>(b)) ^ 0x5157u;
      TuneOptions opts;
      opts.criterion = cfg.criterion;
      opts.threads = 1;  // replications already run in parallel
      TuneOutcome outcome = tune_with_fit(ds.x, ds.q, grid, solver, opts);
      selected[bi] = outcome.report.selected_index;
      lrk_fits[bi] = std::move(outcome.best);
    } catch (const std::exception& e) {
      rep_errors[bi] = e.what();
    }
  });

  WarpingCellResult out;
  out.lambda_max = anchors_l1.front();
  out.fused_max = anchors_fused.front();

  std::vector<Eigen::MatrixXd> lrk_b;
  std::vector<Eigen::MatrixXd> ols_b;
  std::vector<FitResult> lrk_ok;
  std::vector<FitResult> ols_ok;
  for (int b = 0; b < b_reps; ++b) {
    const auto bi = static_cast<std::size_t>(b);
    if (!rep_errors[bi].empty()) {
      ++out.failed_reps;
      continue;
    }
    out.selected_cells.push_back(selected[bi]);
    lrk_b.push_back(lrk_fits[bi]->coefficients.b);
    ols_b.push_back(ols_fits[bi]->coefficients.b);
    lrk_ok.push_back(std::move(*lrk_fits[bi]));
    ols_ok.push_back(std::move(*ols_fits[bi]));
    train_x.push_back(datasets[bi].x);
    train_q.push_back(datasets[bi].q);
  }
  if (lrk_ok.empty()) throw TuningFailed("warping benchmark: every replication failed");

  const CoeffMse lrk_mse = coeff_mse(lrk_b, truth.b);
  const CoeffMse ols_mse = coeff_mse(ols_b, truth.b);
  const PredErr lrk_pe = prediction_error(lrk_ok, train_x, train_q, holdout.x, holdout.q);
  const PredErr ols_pe = prediction_error(ols_ok, train_x, train_q, holdout.x, holdout.q);
  out.lrk = summarize_monte_carlo(lrk_mse, lrk_pe, static_cast<int>(lrk_ok.size()));
  out.ols = summarize_monte_carlo(ols_mse, ols_pe, static_cast<int>(ols_ok.size()));
  return out;
}

void FactorBenchConfig::validate() const {
  if (n < 2 || p < 1 || m_quantiles < 2 || k_factors < 1 || b_reps < 1)
    throw InvalidInput("factor benchmark: n, p, m_quantiles, k_factors, b_reps must be positive");
  if (!(noise_sd >= 0.0)) throw InvalidInput("factor benchmark: noise_sd must be >= 0");
  if (rank < 1) throw InvalidInput("factor benchmark: rank must be >= 1");
  if (!(lambda >= 0.0) || !(lambda_fused >= 0.0))
    throw InvalidInput("factor benchmark: penalties must be >= 0");
  if (threads < 1) throw InvalidInput("factor benchmark: threads must be >= 1");
}

FactorCellResult run_factor_cell(const FactorBenchConfig& cfg) {
  cfg.validate();

  FactorConfig base;
  base.n = cfg.n;
  base.p = cfg.p;
  base.m_quantiles = cfg.m_quantiles;
  base.k_factors = cfg.k_factors;
  base.noise_sd = cfg.noise_sd;
  base.seed = cfg.seed;
  const FactorModel model = draw_factor_model(base);

  const int b_reps = cfg.b_reps;
  struct RepOut {
    std::vector<double> prop_train, prop_test, ord_train, ord_test;
    bool pseudoinverse = false;
    bool converged = true;
    std::string error;
  };
  std::vector<RepOut> reps(static_cast<std::size_t>(b_reps));

  parallel_for(b_reps, cfg.threads, [&](int b) {
    RepOut& r = reps[static_cast<std::size_t>(b)];
    try {
      FactorConfig train_cfg = base;
      train_cfg.seed = mix_seed(cfg.seed, kTrainStream + static_cast<std::uint64_t>(b));
      FactorConfig test_cfg = base;
      test_cfg.seed = mix_seed(cfg.seed, kTestStream + static_cast<std::uint64_t>(b));
      const SimulatedDataset train = gen_factor_dataset(train_cfg, model);
      const SimulatedDataset test = gen_factor_dataset(test_cfg, model);

      const FitResult ols = fit_ols(train.x, train.q);
      r.pseudoinverse = ols.pseudoinverse_used;

      SolverConfig solver = cfg.solver;
      solver.prox.lambda_l1 = cfg.lambda / static_cast<double>(cfg.n);
      solver.prox.lambda_fused = cfg.lambda_fused / static_cast<double>(cfg.n);
      solver.prox.rank = std::min(cfg.rank, std::min(cfg.p, cfg.m_quantiles));
      solver.seed = mix_seed(cfg.seed, kTrainStream + static_cast<std::uint64_t>(b)) ^ 0x7C3Du;
      const FitResult lrk = fit_lowrank(train.x, train.q, solver);
      r.converged = lrk.converged;

      r.prop_train = per_observation_rmse(train.q, predict_matrix(lrk, train.x.x()));
      r.prop_test = per_observation_rmse(test.q, predict_matrix(lrk, test.x.x()));
      r.ord_train = per_observation_rmse(train.q, predict_matrix(ols, train.x.x()));
      r.ord_test = per_observation_rmse(test.q, predict_matrix(ols, test.x.x()));
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });

  FactorCellResult out;
  std::vector<std::vector<double>> prop_train, prop_test, ord_train, ord_test;
  for (const RepOut& r : reps) {
    if (!r.error.empty()) {
      ++out.failed_reps;
      continue;
    }
    out.proposed.pseudoinverse_used = false;  // the low-rank path never falls back
    out.ordinary.pseudoinverse_used = out.ordinary.pseudoinverse_used || r.pseudoinverse;
    out.proposed.all_converged = out.proposed.all_converged && r.converged;
    prop_train.push_back(r.prop_train);
    prop_test.push_back(r.prop_test);
    ord_train.push_back(r.ord_train);
    ord_test.push_back(r.ord_test);
  }
  if (prop_train.empty()) throw TuningFailed("factor benchmark: every replication failed");
  out.proposed.train = pool_rmse(prop_train);
  out.proposed.test = pool_rmse(prop_test);
  out.ordinary.train = pool_rmse(ord_train);
  out.ordinary.test = pool_rmse(ord_test);
  return out;
}

}  // namespace fqr
