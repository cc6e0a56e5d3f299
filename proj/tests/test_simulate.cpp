#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fqr/estimators.hpp"
#include "fqr/quantile.hpp"
#include "fqr/rng.hpp"
#include "fqr/simulate.hpp"

using fqr::FactorConfig;
using fqr::QuantileGrid;
using fqr::ScaleMode;
using fqr::SimulatedDataset;
using fqr::WarpingConfig;

TEST_CASE("ar(1) latents reproduce their lag-one correlation") {
  fqr::Rng rng(4242);
  const Eigen::MatrixXd z = fqr::gen_ar1_normals(100000, 3, 0.9, rng);
  for (int j = 0; j + 1 < 3; ++j) {
    const auto a = z.col(j).array() - z.col(j).mean();
    const auto b = z.col(j + 1).array() - z.col(j + 1).mean();
    const double corr = (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
    CHECK(corr == doctest::Approx(0.9).epsilon(0.01));
  }
}

TEST_CASE("copula covariates are uniform marginals with dependence") {
  const fqr::DesignMatrix x = fqr::gen_copula_covariates(50000, 4, 0.9, 7);
  CHECK(x.x().minCoeff() > 0.0);
  CHECK(x.x().maxCoeff() < 1.0);
  for (int j = 0; j < 4; ++j) {
    CHECK(x.x().col(j).mean() == doctest::Approx(0.5).epsilon(0.01));
    // Variance of Uniform(0, 1) is 1/12.
    const double var = (x.x().col(j).array() - x.x().col(j).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.03));
  }
}

TEST_CASE("incomplete beta CDF: closed-form anchors") {
  CHECK(fqr::incomplete_beta_cdf(0.3, 1, 1) == doctest::Approx(0.3).epsilon(1e-12));
  // I_u(2, 1) = u^2 and I_u(1, 2) = 1 - (1 - u)^2.
  CHECK(fqr::incomplete_beta_cdf(0.5, 2, 1) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(fqr::incomplete_beta_cdf(0.5, 1, 2) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(fqr::incomplete_beta_cdf(0.0, 3, 4) == 0.0);
  CHECK(fqr::incomplete_beta_cdf(1.0, 3, 4) == 1.0);
  // Symmetry I_u(a, b) = 1 - I_{1-u}(b, a).
  for (double u : {0.1, 0.35, 0.8})
    CHECK(fqr::incomplete_beta_cdf(u, 4, 7) ==
          doctest::Approx(1.0 - fqr::incomplete_beta_cdf(1.0 - u, 7, 4)).epsilon(1e-12));
}

TEST_CASE("centered beta basis sums to zero pointwise") {
  for (int r : {3, 5, 10})
    for (double u : {0.05, 0.3, 0.5, 0.77, 0.95}) {
      double total = 0.0;
      for (int k = 0; k <= r; ++k) total += fqr::beta_basis(u, k, r);
      CHECK(std::abs(total) < 1e-10);
    }
}

TEST_CASE("true warping coefficients have the designed rank and scale decay") {
  const QuantileGrid grid = QuantileGrid::midpoint(100);
  const fqr::WarpingCoefficients coeffs = fqr::draw_warping_coefficients(25, 5, 99);
  REQUIRE(coeffs.c.rows() == 25);
  REQUIRE(coeffs.c.cols() == 6);

  const Eigen::MatrixXd b_invp = fqr::warping_true_b(coeffs, 5, grid, 25, ScaleMode::InvP);
  const Eigen::MatrixXd b_sqrt = fqr::warping_true_b(coeffs, 5, grid, 25, ScaleMode::InvSqrtP);
  CHECK(fqr::numerical_rank(b_invp) == 5);
  CHECK(fqr::numerical_rank(b_sqrt) == 5);
  // InvSqrtP is the InvP surface rescaled by sqrt(p).
  CHECK((b_sqrt - std::sqrt(25.0) * b_invp).lpNorm<Eigen::Infinity>() < 1e-12);

  // Rank is capped by the basis dimension even when p is smaller.
  const fqr::WarpingCoefficients small = fqr::draw_warping_coefficients(3, 5, 99);
  const Eigen::MatrixXd b_small = fqr::warping_true_b(small, 5, grid, 3, ScaleMode::InvP);
  CHECK(fqr::numerical_rank(b_small) == 3);
}

TEST_CASE("response warp is the identity in expectation") {
  // With flat Dirichlet weights each mixture component has mean 1 / (K + 1),
  // and the Beta-CDF family averages to the identity.
  const int k_warp = 50;
  const int m = 60;
  Eigen::VectorXd q(m);
  for (int j = 0; j < m; ++j) q[j] = (j + 0.5) / m;
  fqr::Rng rng(31);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
  const int reps = 10000;
  for (int t = 0; t < reps; ++t)
    acc += fqr::warp_response_row(q, rng.dirichlet(k_warp + 1));
  acc /= reps;
  CHECK((acc - q).lpNorm<Eigen::Infinity>() < 0.02);
}

TEST_CASE("warping dataset invariants") {
  WarpingConfig cfg;
  cfg.n = 50;
  cfg.p = 25;
  cfg.r_true = 5;
  cfg.m_grid = 100;
  cfg.seed = 2024;
  const SimulatedDataset ds = fqr::gen_warping_dataset(cfg);
  CHECK(ds.design == "warping");
  CHECK(ds.x.n() == 50);
  CHECK(ds.x.p() == 25);
  CHECK(ds.q.n() == 50);
  CHECK(ds.q.m() == 100);
  CHECK(ds.true_center == 0.5);
  CHECK(ds.repair_count == 0);  // default inverse-p scale leaves ample slope room
  CHECK(fqr::numerical_rank(ds.true_b.b) == 5);
  // The generator tolerates latent wobble up to 1e-9 before repairing, and
  // the response warp can amplify that by its Lipschitz constant (~k_warp).
  for (int i = 0; i < ds.q.n(); ++i) {
    CHECK(fqr::is_nondecreasing(ds.q.values.row(i).transpose(), 1e-7));
    CHECK(ds.q.values.row(i).minCoeff() >= 0.0);
    CHECK(ds.q.values.row(i).maxCoeff() <= 1.0);
  }
  // The latent intercept is the identity quantile function on the grid.
  for (int j = 0; j < 100; ++j)
    CHECK(ds.true_intercept[j] == ds.q.grid[j]);
}

TEST_CASE("pseudo-errors are centered near zero") {
  WarpingConfig cfg;
  cfg.n = 50;
  cfg.p = 25;
  cfg.r_true = 10;
  cfg.m_grid = 100;
  cfg.seed = 11;
  const SimulatedDataset ds = fqr::gen_warping_dataset(cfg);
  const Eigen::MatrixXd eps = ds.q.values - ds.latent_quantiles;
  CHECK(std::abs(eps.mean()) < 0.02);
}

TEST_CASE("frozen coefficients pin the truth across replications") {
  WarpingConfig cfg;
  cfg.n = 20;
  cfg.p = 8;
  cfg.r_true = 3;
  cfg.m_grid = 40;
  const fqr::WarpingCoefficients coeffs = fqr::draw_warping_coefficients(8, 3, 555);
  cfg.seed = 1;
  const SimulatedDataset a = fqr::gen_warping_dataset(cfg, coeffs);
  cfg.seed = 2;
  const SimulatedDataset b = fqr::gen_warping_dataset(cfg, coeffs);
  CHECK((a.true_b.b - b.true_b.b).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.x.x() - b.x.x()).lpNorm<Eigen::Infinity>() != 0.0);

  const SimulatedDataset a2 = fqr::gen_warping_dataset(cfg, coeffs);
  CHECK((b.q.values - a2.q.values).lpNorm<Eigen::Infinity>() == 0.0);  // same seed, same data
}

TEST_CASE("warping dataset repairs rows that overrun the slope budget") {
  // The sqrt-p scale admits much larger slopes; an extreme draw must be
  // pulled back rather than rejected, and stay a valid quantile function.
  WarpingConfig cfg;
  cfg.n = 50;
  cfg.p = 25;
  cfg.r_true = 5;
  cfg.m_grid = 60;
  cfg.scale_mode = ScaleMode::InvSqrtP;
  bool found = false;
  for (std::uint64_t seed = 0; seed < 300 && !found; ++seed) {
    cfg.seed = seed;
    const SimulatedDataset ds = fqr::gen_warping_dataset(cfg);
    if (ds.repair_count == 0) continue;
    found = true;
    for (int i = 0; i < ds.q.n(); ++i) {
      CHECK(fqr::is_nondecreasing(ds.q.values.row(i).transpose(), 1e-7));
      CHECK(ds.q.values.row(i).minCoeff() >= 0.0);
      CHECK(ds.q.values.row(i).maxCoeff() <= 1.0);
    }
    // Latent rows — repaired or not — stay within the generator's slack.
    for (int i = 0; i < ds.q.n(); ++i)
      CHECK(fqr::is_nondecreasing(ds.latent_quantiles.row(i).transpose(), 1e-9));
  }
  CHECK(found);
}

TEST_CASE("factor dataset invariants") {
  FactorConfig cfg;
  cfg.n = 40;
  cfg.p = 20;
  cfg.m_quantiles = 50;
  cfg.seed = 3;
  const SimulatedDataset ds = fqr::gen_factor_dataset(cfg);
  CHECK(ds.design == "factor");
  CHECK(ds.x.n() == 40);
  CHECK(ds.q.m() == 50);
  CHECK(fqr::numerical_rank(ds.true_b.b) <= 2);
  for (int i = 0; i < ds.q.n(); ++i)
    CHECK(fqr::is_nondecreasing(ds.q.values.row(i).transpose()));
  // Heavy cell noise: essentially every row needs rearrangement.
  CHECK(ds.repair_count > 30);

  const SimulatedDataset again = fqr::gen_factor_dataset(cfg);
  CHECK((again.q.values - ds.q.values).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("noiseless single-factor rows form a rank-one family") {
  FactorConfig cfg;
  cfg.n = 30;
  cfg.p = 10;
  cfg.m_quantiles = 40;
  cfg.k_factors = 1;
  cfg.noise_sd = 0.0;
  cfg.seed = 17;
  const SimulatedDataset ds = fqr::gen_factor_dataset(cfg);
  CHECK(ds.repair_count == 0);
  const Eigen::MatrixXd centered =
      ds.q.values.rowwise() - ds.q.values.colwise().mean();
  CHECK(fqr::numerical_rank(centered) == 1);
  CHECK(fqr::numerical_rank(ds.true_b.b) == 1);
}

TEST_CASE("factor model reuse freezes the truth") {
  FactorConfig cfg;
  cfg.n = 15;
  cfg.p = 6;
  cfg.m_quantiles = 30;
  cfg.seed = 9;
  const fqr::FactorModel model = fqr::draw_factor_model(cfg);
  cfg.seed = 100;
  const SimulatedDataset a = fqr::gen_factor_dataset(cfg, model);
  cfg.seed = 200;
  const SimulatedDataset b = fqr::gen_factor_dataset(cfg, model);
  CHECK((a.true_b.b - b.true_b.b).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((a.q.values - b.q.values).lpNorm<Eigen::Infinity>() != 0.0);
}

TEST_CASE("generators reject bad dimensions") {
  WarpingConfig wc;
  wc.n = 0;
  CHECK_THROWS_AS(fqr::gen_warping_dataset(wc), fqr::InvalidInput);
  FactorConfig fc;
  fc.noise_sd = -1.0;
  CHECK_THROWS_AS(fqr::gen_factor_dataset(fc), fqr::InvalidInput);
}
