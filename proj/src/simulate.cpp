#include "fqr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "fqr/errors.hpp"

namespace fqr {

namespace {

// Standard normal CDF.
double phi(double z) { return 0.5 * std::erfc(-z / M_SQRT2); }

// log C(n, j) table for j = 0..n.
std::vector<double> log_binomials(int n) {
  std::vector<double> lc(static_cast<std::size_t>(n) + 1);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);
  for (int j = 0; j <= n; ++j)
    lc[static_cast<std::size_t>(j)] = lg_n1 - std::lgamma(static_cast<double>(j) + 1.0) -
                                      std::lgamma(static_cast<double>(n - j) + 1.0);
  return lc;
}

// Binomial(n, u) pmf over j = 0..n via the log-gamma form; stable across the
// whole parameter range.
void binomial_pmf(double u, const std::vector<double>& lc, std::vector<double>& pmf) {
  const int n = static_cast<int>(lc.size()) - 1;
  pmf.assign(lc.size(), 0.0);
  if (u <= 0.0) {
    pmf[0] = 1.0;
    return;
  }
  if (u >= 1.0) {
    pmf[static_cast<std::size_t>(n)] = 1.0;
    return;
  }
  const double lu = std::log(u);
  const double l1u = std::log1p(-u);
  for (int j = 0; j <= n; ++j)
    pmf[static_cast<std::size_t>(j)] =
        std::exp(lc[static_cast<std::size_t>(j)] + static_cast<double>(j) * lu +
                 static_cast<double>(n - j) * l1u);
}

constexpr double kMonotoneSlack = 1e-9;

}  // namespace

Eigen::MatrixXd gen_ar1_normals(int n, int p, double rho, Rng& rng) {
  if (n < 1 || p < 1) throw InvalidInput("gen_ar1_normals: need positive dimensions");
  if (!(rho > -1.0 && rho < 1.0)) throw InvalidInput("gen_ar1_normals: rho must lie in (-1, 1)");
  const double innov = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd z(n, p);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = rng.normal();
    for (int j = 1; j < p; ++j) z(i, j) = rho * z(i, j - 1) + innov * rng.normal();
  }
  return z;
}

DesignMatrix gen_copula_covariates(int n, int p, double rho, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd z = gen_ar1_normals(n, p, rho, rng);
  return DesignMatrix(z.unaryExpr([](double v) { return phi(v); }));
}

double incomplete_beta_cdf(double u, int a, int b) {
  if (a < 1 || b < 1) throw InvalidInput("incomplete_beta_cdf: parameters must be >= 1");
  if (!(u >= 0.0 && u <= 1.0)) throw InvalidInput("incomplete_beta_cdf: u must lie in [0, 1]");
  if (u == 0.0) return 0.0;
  if (u == 1.0) return 1.0;
  // For integer parameters, I_u(a, b) = P(Binomial(a+b-1, u) >= a).
  const int n = a + b - 1;
  const auto lc = log_binomials(n);
  const double lu = std::log(u);
  const double l1u = std::log1p(-u);
  double tail = 0.0;
  for (int j = n; j >= a; --j)
    tail += std::exp(lc[static_cast<std::size_t>(j)] + static_cast<double>(j) * lu +
                     static_cast<double>(n - j) * l1u);
  return std::min(tail, 1.0);
}

double beta_basis(double u, int k, int r) {
  if (r < 0 || k < 0 || k > r) throw InvalidInput("beta_basis: need 0 <= k <= r");
  if (!(u >= 0.0 && u <= 1.0)) throw InvalidInput("beta_basis: u must lie in [0, 1]");
  if (r == 0) return 0.0;  // I_u(1, 1) = u identically
  return incomplete_beta_cdf(u, k + 1, r - k + 1) - u;
}

WarpingCoefficients draw_warping_coefficients(int p, int r_true, std::uint64_t seed) {
  if (p < 1 || r_true < 0) throw InvalidInput("draw_warping_coefficients: bad dimensions");
  Rng rng(seed);
  Eigen::MatrixXd c(p, r_true + 1);
  for (int j = 0; j < p; ++j) {
    const auto row = rng.dirichlet(r_true + 1);
    for (int k = 0; k <= r_true; ++k) c(j, k) = row[static_cast<std::size_t>(k)];
  }
  return WarpingCoefficients{std::move(c)};
}

Eigen::MatrixXd warping_true_b(const WarpingCoefficients& coeffs, int r_true,
                               const QuantileGrid& grid, int p, ScaleMode scale_mode) {
  if (coeffs.c.rows() != p || coeffs.c.cols() != r_true + 1)
    throw InvalidInput("warping_true_b: coefficient matrix has the wrong shape");
  const int m = grid.size();
  Eigen::MatrixXd basis(r_true + 1, m);
  for (int k = 0; k <= r_true; ++k)
    for (int j = 0; j < m; ++j) basis(k, j) = beta_basis(grid[j], k, r_true);
  const double scale = scale_mode == ScaleMode::InvP
                           ? 1.0 / static_cast<double>(p)
                           : 1.0 / std::sqrt(static_cast<double>(p));
  return scale * coeffs.c * basis;
}

Eigen::VectorXd warp_response_row(const Eigen::VectorXd& q, const std::vector<double>& w) {
  const int kw = static_cast<int>(w.size()) - 1;
  if (kw < 0) throw InvalidInput("warp_response_row: empty weight vector");
  const int n = kw + 1;  // binomial count for Beta(k+1, kw-k+1) CDFs
  const auto lc = log_binomials(n);
  std::vector<double> pmf;
  // Suffix weight sums: out = sum_k w_k P(Bin >= k+1) = sum_j pmf_j prefix(j).
  std::vector<double> prefix(static_cast<std::size_t>(n) + 1, 0.0);
  for (int j = 1; j <= n; ++j)
    prefix[static_cast<std::size_t>(j)] =
        prefix[static_cast<std::size_t>(j - 1)] + w[static_cast<std::size_t>(j - 1)];
  Eigen::VectorXd out(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double qi = std::clamp(q[i], 0.0, 1.0);
    binomial_pmf(qi, lc, pmf);
    double acc = 0.0;
    for (int j = 1; j <= n; ++j)
      acc += pmf[static_cast<std::size_t>(j)] * prefix[static_cast<std::size_t>(j)];
    out[i] = acc;
  }
  return out;
}

SimulatedDataset gen_warping_dataset(const WarpingConfig& cfg) {
  return gen_warping_dataset(
      cfg, draw_warping_coefficients(cfg.p, cfg.r_true, mix_seed(cfg.seed, 1)));
}

SimulatedDataset gen_warping_dataset(const WarpingConfig& cfg, const WarpingCoefficients& coeffs) {
  if (cfg.n < 1 || cfg.p < 1 || cfg.m_grid < 1 || cfg.r_true < 0 || cfg.k_warp < 0)
    throw InvalidInput("gen_warping_dataset: bad dimensions");
  const QuantileGrid grid = QuantileGrid::midpoint(cfg.m_grid);
  const Eigen::MatrixXd true_b = warping_true_b(coeffs, cfg.r_true, grid, cfg.p, cfg.scale_mode);

  Rng rng_x(mix_seed(cfg.seed, 2));
  Rng rng_w(mix_seed(cfg.seed, 3));
  Eigen::MatrixXd z = gen_ar1_normals(cfg.n, cfg.p, cfg.rho, rng_x);
  Eigen::MatrixXd xmat = z.unaryExpr([](double v) { return phi(v); });

  // Conditional quantile rows Q(u | x_i) = u + sum_j B_true[j, .] (x_ij - 1/2).
  Eigen::MatrixXd latent =
      (xmat.array() - 0.5).matrix() * true_b;
  Eigen::Map<const Eigen::RowVectorXd> upts(grid.points().data(), grid.size());
  latent.rowwise() += upts;

  int repair_count = 0;
  for (int i = 0; i < cfg.n; ++i) {
    bool valid = true;
    double prev = 0.0;
    for (int j = 0; j < cfg.m_grid; ++j) {
      const double v = latent(i, j);
      if (v < prev - kMonotoneSlack || v > 1.0 + kMonotoneSlack) {
        valid = false;
        break;
      }
      prev = v;
    }
    if (!valid) {
      // An extreme covariate draw can push the linear part past the slope
      // budget of the unit interval. Pull the row back into the valid set;
      // the repaired row is the truth the response gets warped from.
      Eigen::VectorXd row = latent.row(i).transpose().cwiseMax(0.0).cwiseMin(1.0);
      latent.row(i) = monotone_rearrange(row).transpose();
      ++repair_count;
    }
  }

  Eigen::MatrixXd responses(cfg.n, cfg.m_grid);
  for (int i = 0; i < cfg.n; ++i) {
    const auto w = rng_w.dirichlet(cfg.k_warp + 1);
    // Warping a nondecreasing row is nondecreasing only up to floating-point
    // wobble plus the slack tolerated above; the rearrangement is the exact
    // identity on clean rows and quietly absorbs the rest.
    responses.row(i) =
        monotone_rearrange(warp_response_row(latent.row(i).transpose(), w)).transpose();
  }

  Eigen::VectorXd intercept(cfg.m_grid);
  for (int j = 0; j < cfg.m_grid; ++j) intercept[j] = grid[j];

  return SimulatedDataset{
      .x = DesignMatrix(std::move(xmat)),
      .q = QuantileMatrix(grid, std::move(responses)),
      .true_b = CoefficientMatrix{true_b, grid, std::nullopt},
      .true_intercept = std::move(intercept),
      .latent_quantiles = std::move(latent),
      .repair_count = repair_count,
      .design = "warping",
      .true_center = 0.5,
  };
}

FactorModel draw_factor_model(const FactorConfig& cfg) {
  if (cfg.p < 1 || cfg.m_quantiles < 1 || cfg.k_factors < 1)
    throw InvalidInput("draw_factor_model: bad dimensions");
  Rng rng(mix_seed(cfg.seed, 11));
  const int m = cfg.m_quantiles;
  const int kf = cfg.k_factors;

  // Baseline: sorted standard normal draws, an increasing quantile-like curve.
  Eigen::VectorXd mu(m);
  for (int j = 0; j < m; ++j) mu[j] = rng.normal();
  std::sort(mu.data(), mu.data() + m);

  // Factor curves: smooth distribution deformations (shift, tilt, low-order
  // polynomial wiggles) with seeded normal amplitudes. Smoothness keeps rows
  // near-monotone so rearrangement mainly repairs the additive noise.
  Eigen::MatrixXd sigma(kf, m);
  for (int k = 0; k < kf; ++k) {
    const double amp = 0.5 * rng.normal();
    for (int j = 0; j < m; ++j) {
      const double t = (static_cast<double>(j) + 0.5) / static_cast<double>(m);
      double g = 1.0;
      if (k == 1) g = t - 0.5;
      if (k >= 2) {
        const double s = 2.0 * t - 1.0;
        g = std::cos(static_cast<double>(k) * std::acos(std::clamp(s, -1.0, 1.0))) /
            static_cast<double>(k);
      }
      sigma(k, j) = amp * g;
    }
  }

  // Loadings with unit-variance factor scores for standard normal covariates.
  Eigen::MatrixXd loadings(cfg.p, kf);
  const double col_scale = 1.0 / std::sqrt(static_cast<double>(cfg.p));
  for (int j = 0; j < cfg.p; ++j)
    for (int k = 0; k < kf; ++k) loadings(j, k) = col_scale * rng.normal();

  return FactorModel{std::move(mu), std::move(sigma), std::move(loadings)};
}

SimulatedDataset gen_factor_dataset(const FactorConfig& cfg) {
  return gen_factor_dataset(cfg, draw_factor_model(cfg));
}

SimulatedDataset gen_factor_dataset(const FactorConfig& cfg, const FactorModel& model) {
  if (cfg.n < 1) throw InvalidInput("gen_factor_dataset: need positive n");
  if (!(cfg.noise_sd >= 0.0)) throw InvalidInput("gen_factor_dataset: noise_sd must be >= 0");
  if (model.mu.size() != cfg.m_quantiles || model.sigma.rows() != cfg.k_factors ||
      model.sigma.cols() != cfg.m_quantiles || model.loadings.rows() != cfg.p ||
      model.loadings.cols() != cfg.k_factors)
    throw InvalidInput("gen_factor_dataset: model shapes do not match the config");

  Rng rng(mix_seed(cfg.seed, 12));
  const int m = cfg.m_quantiles;

  Eigen::MatrixXd xmat(cfg.n, cfg.p);
  for (int i = 0; i < cfg.n; ++i)
    for (int j = 0; j < cfg.p; ++j) xmat(i, j) = rng.normal();

  // Scores u_i = loadings^T x_i; conditional mean rows mu + u_i^T sigma.
  Eigen::MatrixXd scores = xmat * model.loadings;  // n x K
  Eigen::MatrixXd latent = scores * model.sigma;   // n x m
  latent.rowwise() += model.mu.transpose();

  Eigen::MatrixXd rows = latent;
  if (cfg.noise_sd > 0.0) {
    for (int i = 0; i < cfg.n; ++i)
      for (int j = 0; j < m; ++j) rows(i, j) += cfg.noise_sd * rng.normal();
  }

  int repaired = 0;
  for (int i = 0; i < cfg.n; ++i) {
    Eigen::VectorXd sorted = monotone_rearrange(rows.row(i).transpose());
    if ((sorted - rows.row(i).transpose()).cwiseAbs().maxCoeff() > 0.0) ++repaired;
    rows.row(i) = sorted.transpose();
  }

  return SimulatedDataset{
      .x = DesignMatrix(std::move(xmat)),
      .q = QuantileMatrix(QuantileGrid::midpoint(m), std::move(rows)),
      .true_b = CoefficientMatrix{model.loadings * model.sigma, QuantileGrid::midpoint(m),
                                  std::nullopt},
      .true_intercept = model.mu,
      .latent_quantiles = std::move(latent),
      .repair_count = repaired,
      .design = "factor",
      .true_center = 0.0,
  };
}

}  // namespace fqr
