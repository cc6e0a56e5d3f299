#include "fqr/selection.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "fqr/parallel.hpp"

namespace fqr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

double gaussian_loglik(double rss, long n_obs_total) {
  if (n_obs_total < 1) throw InvalidInput("gaussian_loglik: need positive observation count");
  if (!(rss >= 0.0)) throw InvalidInput("gaussian_loglik: rss must be nonnegative");
  if (rss == 0.0) return kInf;
  const double n = static_cast<double>(n_obs_total);
  const double sigma2 = rss / n;
  return -0.5 * n * (std::log(2.0 * M_PI * sigma2) + 1.0);
}

std::vector<double> smoothed_weights(const std::vector<double>& criteria) {
  if (criteria.empty()) throw InvalidInput("smoothed_weights: empty criteria");
  std::vector<double> w(criteria.size(), 0.0);

  std::size_t inf_count = 0;
  for (double c : criteria)
    if (c == -kInf) ++inf_count;
  if (inf_count > 0) {  // perfect-fit cells dominate every finite cell
    for (std::size_t i = 0; i < criteria.size(); ++i)
      if (criteria[i] == -kInf) w[i] = 1.0 / static_cast<double>(inf_count);
    return w;
  }

  std::optional<double> cmin;
  for (double c : criteria) {
    if (std::isnan(c)) continue;
    if (!cmin || c < *cmin) cmin = c;
  }
  if (!cmin) throw InvalidInput("smoothed_weights: no usable criterion values");

  double total = 0.0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (std::isnan(criteria[i])) continue;
    w[i] = std::exp(-0.5 * (criteria[i] - *cmin));  // shift by the minimum for stability
    total += w[i];
  }
  for (auto& wi : w) wi /= total;
  return w;
}

TuneOutcome tune_with_fit(const DesignMatrix& x, const QuantileMatrix& q,
                          const std::vector<ProxConfig>& grid, const SolverConfig& base,
                          const TuneOptions& opts) {
  if (grid.empty()) throw InvalidInput("tune: empty penalty grid");
  const int cells = static_cast<int>(grid.size());
  const long n_total = static_cast<long>(x.n()) * static_cast<long>(q.m());
  const double bic_n = opts.bic_n == BicSampleSize::Observations
                           ? static_cast<double>(x.n())
                           : static_cast<double>(n_total);

  TuningReport report;
  report.criterion_used = opts.criterion;
  report.cells.resize(grid.size());
  std::vector<std::optional<FitResult>> fits(grid.size());

  const Eigen::MatrixXd qc = q.values.rowwise() - q.values.colwise().mean();

  parallel_for(cells, opts.threads, [&](int k) {
    CriterionCell& cell = report.cells[static_cast<std::size_t>(k)];
    cell.lambda_l1 = grid[static_cast<std::size_t>(k)].lambda_l1;
    cell.lambda_fused = grid[static_cast<std::size_t>(k)].lambda_fused;
    cell.rank = grid[static_cast<std::size_t>(k)].rank;
    SolverConfig cfg = base;
    cfg.prox = grid[static_cast<std::size_t>(k)];
    cfg.seed = base.seed ^ static_cast<std::uint64_t>(k);
    try {
      FitResult fit = fit_lowrank(x, q, cfg);
      const double rss = (qc - x.centered() * fit.coefficients.b).squaredNorm();
      cell.loglik = gaussian_loglik(rss, n_total);
      cell.df = fit.df;
      cell.perfect_fit = std::isinf(cell.loglik);
      cell.aic = -2.0 * cell.loglik + 2.0 * cell.df;
      cell.bic = -2.0 * cell.loglik + std::log(bic_n) * cell.df;
      fits[static_cast<std::size_t>(k)] = std::move(fit);
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
      cell.aic = cell.bic = std::numeric_limits<double>::quiet_NaN();
      cell.loglik = std::numeric_limits<double>::quiet_NaN();
    }
  });

  bool any_ok = false;
  std::vector<double> aics(grid.size()), bics(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    aics[k] = report.cells[k].aic;
    bics[k] = report.cells[k].bic;
    any_ok = any_ok || !report.cells[k].failed;
  }
  if (!any_ok) {
    std::string detail = "tune: every grid cell failed:";
    for (std::size_t k = 0; k < grid.size(); ++k)
      detail += "\n  cell " + std::to_string(k) + ": " + report.cells[k].error;
    throw TuningFailed(detail);
  }

  const std::vector<double> saic = smoothed_weights(aics);
  const std::vector<double> sbic = smoothed_weights(bics);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    report.cells[k].saic = saic[k];
    report.cells[k].sbic = sbic[k];
  }

  const std::vector<double>& sel = opts.criterion == Criterion::SAic ? saic : sbic;
  int best = -1;
  for (std::size_t k = 0; k < sel.size(); ++k)
    if (best < 0 || sel[k] > sel[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  report.selected_index = best;

  return TuneOutcome{std::move(report), std::move(*fits[static_cast<std::size_t>(best)])};
}

TuningReport tune(const DesignMatrix& x, const QuantileMatrix& q,
                  const std::vector<ProxConfig>& grid, const SolverConfig& base,
                  const TuneOptions& opts) {
  return tune_with_fit(x, q, grid, base, opts).report;
}

}  // namespace fqr
