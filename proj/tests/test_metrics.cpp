#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fqr/estimators.hpp"
#include "fqr/metrics.hpp"
#include "fqr/quantile.hpp"
#include "fqr/rng.hpp"

using fqr::CoeffMse;
using fqr::DesignMatrix;
using fqr::QuantileGrid;
using fqr::QuantileMatrix;
using fqr::QuantileVector;

namespace {

/// Noiseless linear fixture with monotone rows following one fixed affine
/// map Q_i = u + x_i^T B, shared by every dataset built from the same B so a
/// fit on one predicts another exactly.
struct Fixture {
  DesignMatrix x;
  QuantileMatrix q;
};

Fixture make_linear(int n, int p, int m, const Eigen::MatrixXd& b, std::uint64_t seed) {
  fqr::Rng rng(seed);
  Eigen::MatrixXd xmat(n, p);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j) xmat(i, j) = rng.normal();
  const QuantileGrid grid = QuantileGrid::midpoint(m);
  Eigen::MatrixXd rows = xmat * b;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) rows(i, j) += grid[j];
  return Fixture{DesignMatrix(std::move(xmat)), QuantileMatrix(grid, std::move(rows))};
}

}  // namespace

TEST_CASE("coefficient error decomposes into bias and variance") {
  fqr::Rng rng(77);
  const int p = 3, m = 4, reps = 10;
  Eigen::MatrixXd truth(p, m);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < m; ++j) truth(i, j) = rng.normal();

  std::vector<Eigen::MatrixXd> estimates;
  for (int b = 0; b < reps; ++b) {
    Eigen::MatrixXd e = truth;
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < m; ++j) e(i, j) += 0.3 * rng.normal();
    estimates.push_back(std::move(e));
  }

  const CoeffMse out = fqr::coeff_mse(estimates, truth);
  REQUIRE(static_cast<int>(out.per_rep.size()) == reps);

  // Recompute every term from the definition.
  Eigen::MatrixXd mean_est = Eigen::MatrixXd::Zero(p, m);
  for (const auto& e : estimates) mean_est += e;
  mean_est /= static_cast<double>(reps);
  const double bias_sq = (mean_est - truth).squaredNorm() / m;
  double mse = 0.0, var = 0.0;
  for (int b = 0; b < reps; ++b) {
    const double rep = (estimates[static_cast<std::size_t>(b)] - truth).squaredNorm() / m;
    CHECK(out.per_rep[static_cast<std::size_t>(b)] == doctest::Approx(rep).epsilon(1e-12));
    mse += rep;
    var += (estimates[static_cast<std::size_t>(b)] - mean_est).squaredNorm() / m;
  }
  mse /= reps;
  var /= reps;
  CHECK(out.mse == doctest::Approx(mse).epsilon(1e-12));
  CHECK(out.bias_sq == doctest::Approx(bias_sq).epsilon(1e-12));
  CHECK(out.var == doctest::Approx(var).epsilon(1e-12));
  CHECK(out.mse == doctest::Approx(out.bias_sq + out.var).epsilon(1e-12));
}

TEST_CASE("symmetric estimates around the truth have zero bias") {
  Eigen::MatrixXd truth = Eigen::MatrixXd::Constant(2, 3, 1.0);
  Eigen::MatrixXd delta(2, 3);
  delta << 0.1, -0.2, 0.3, 0.4, -0.5, 0.6;
  const CoeffMse out = fqr::coeff_mse({truth + delta, truth - delta}, truth);
  CHECK(out.bias_sq < 1e-12);
  const double expect = delta.squaredNorm() / 3;
  CHECK(out.var == doctest::Approx(expect).epsilon(1e-12));
  CHECK(out.mse == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("per-observation rmse matches offsets and the Wasserstein metric") {
  const QuantileGrid grid = QuantileGrid::midpoint(8);
  Eigen::MatrixXd base(3, 8);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 8; ++j) base(i, j) = (i + 1.0) * grid[j];
  const QuantileMatrix truth(grid, base);

  Eigen::MatrixXd shifted = base;
  const double offs[3] = {1.0, -2.0, 0.5};
  for (int i = 0; i < 3; ++i) shifted.row(i).array() += offs[i];
  const QuantileMatrix fitted(grid, shifted);

  const std::vector<double> rmse = fqr::per_observation_rmse(truth, fitted);
  REQUIRE(rmse.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(rmse[static_cast<std::size_t>(i)] ==
          doctest::Approx(std::abs(offs[i])).epsilon(1e-12));
    CHECK(rmse[static_cast<std::size_t>(i)] ==
          doctest::Approx(fqr::wasserstein2(truth.row(i), fitted.row(i))).epsilon(1e-12));
  }
}

TEST_CASE("residual summary reports sample mean and sd") {
  const QuantileGrid grid = QuantileGrid::midpoint(5);
  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(3, 5);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 5; ++j) base(i, j) = grid[j];
  Eigen::MatrixXd shifted = base;
  for (int i = 0; i < 3; ++i) shifted.row(i).array() += static_cast<double>(i + 1);
  const fqr::RmseSummary s =
      fqr::residual_rmse(QuantileMatrix(grid, base), QuantileMatrix(grid, shifted));
  CHECK(s.mean == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(s.sd == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("prediction error vanishes on a perfect fit and tracks an offset") {
  const int n = 30, p = 3, m = 20;
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, m);
  const QuantileGrid grid = QuantileGrid::midpoint(m);
  for (int j = 0; j < p; ++j)
    for (int k = 0; k < m; ++k) b(j, k) = 0.001 * (j + 1) * grid[k];

  const Fixture tr1 = make_linear(n, p, m, b, 5);
  const Fixture tr2 = make_linear(n, p, m, b, 6);
  std::vector<fqr::FitResult> fits{fqr::fit_ols(tr1.x, tr1.q), fqr::fit_ols(tr2.x, tr2.q)};

  const Fixture ho = make_linear(40, p, m, b, 7);

  // Single perfect fit: both errors vanish.
  const fqr::PredErr exact = fqr::prediction_error(
      {fits[0]}, {tr1.x}, {tr1.q}, ho.x, ho.q);
  CHECK(exact.pe_in < 1e-9);
  // The holdout rows follow the same linear model; OLS on noiseless data
  // recovers it, so out-of-sample error is also numerically zero.
  CHECK(exact.pe_out < 1e-9);

  // Shifted holdout: every distance becomes exactly the shift.
  Eigen::MatrixXd shifted = ho.q.values;
  shifted.array() += 0.3;
  const fqr::PredErr off = fqr::prediction_error(
      fits, {tr1.x, tr2.x}, {tr1.q, tr2.q}, ho.x, QuantileMatrix(grid, shifted));
  CHECK(off.pe_in < 1e-9);
  CHECK(off.pe_out == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("monte carlo summary reports root-scale aggregates") {
  const CoeffMse mse{0.25, 0.09, 0.16, {0.2, 0.3}};
  const fqr::PredErr pe{0.01, 0.02};
  const fqr::MonteCarloSummary s = fqr::summarize_monte_carlo(mse, pe, 2);
  CHECK(s.b_reps == 2);
  CHECK(s.rmse == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.bias == doctest::Approx(0.3).epsilon(1e-15));
  CHECK(s.bias_sq == doctest::Approx(0.09).epsilon(1e-15));
  CHECK(s.sd == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(s.pe_in == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(s.pe_out == doctest::Approx(0.02).epsilon(1e-15));
  REQUIRE(s.per_rep.size() == 2);
  CHECK(s.per_rep[1] == doctest::Approx(0.3).epsilon(1e-15));
}
