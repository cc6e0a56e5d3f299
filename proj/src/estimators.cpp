#include "fqr/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fqr/rng.hpp"

namespace fqr {

namespace {

constexpr double kDfZeroTol = 1e-8;
constexpr int kMaxHalvings = 50;
constexpr double kDivergenceFactor = 1e3;

double count_df(const Eigen::MatrixXd& b) {
  double df = 0.0;
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (std::abs(b.data()[j]) > kDfZeroTol) df += 1.0;
  return df;
}

double fused_penalty(const Eigen::MatrixXd& b) {
  double tv = 0.0;
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    for (Eigen::Index j = 1; j < b.cols(); ++j) tv += std::abs(b(i, j) - b(i, j - 1));
  return tv;
}

}  // namespace

void SolverConfig::validate(int n, int p, int m) const {
  prox.validate(p, m);
  if (max_iters < 1) throw InvalidInput("SolverConfig: max_iters must be positive");
  if (!(tol > 0.0)) throw InvalidInput("SolverConfig: tol must be positive");
  if (!(step_init >= 0.0)) throw InvalidInput("SolverConfig: step_init must be nonnegative");
  if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
    throw InvalidInput("SolverConfig: backtrack_factor must lie in (0, 1)");
  if (!weights.empty()) {
    if (static_cast<int>(weights.size()) != n)
      throw InvalidInput("SolverConfig: weight count does not match observation count");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w))
        throw InvalidInput("SolverConfig: weights must be finite and nonnegative");
  }
}

FitResult fit_ols(const DesignMatrix& x, const QuantileMatrix& q) {
  if (x.n() != q.n())
    throw InvalidInput("fit_ols: design and response have different observation counts");
  if (x.n() < 2) throw InvalidInput("fit_ols: need at least two observations");

  const int n = x.n();
  const int p = x.p();
  const Eigen::MatrixXd& xc = x.centered();
  const double dn = static_cast<double>(n);

  FitResult fit{
      .intercept = q.values.colwise().mean().transpose(),
      .coefficients = CoefficientMatrix{Eigen::MatrixXd::Zero(p, q.m()), q.grid, std::nullopt},
      .column_means = x.column_means(),
      .method = "ols",
  };

  const Eigen::MatrixXd sigma = xc.transpose() * xc / dn;
  const Eigen::MatrixXd gamma = xc.transpose() * q.values / dn;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma);
  if (eig.info() != Eigen::Success) throw NumericalError("fit_ols: eigendecomposition failed");
  const Eigen::VectorXd& ev = eig.eigenvalues();
  const double emax = ev.cwiseAbs().maxCoeff();
  // Relative cutoff keeps genuinely small curvature directions (they are the
  // point of the unpenalized estimator) while zeroing exact collinearity.
  const double cut = emax * 1e-12;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(p);
  int rank = 0;
  for (int j = 0; j < p; ++j) {
    if (ev[j] > cut) {
      inv[j] = 1.0 / ev[j];
      ++rank;
    }
  }
  fit.pseudoinverse_used = rank < p;
  if (fit.pseudoinverse_used)
    fit.warnings.push_back("design covariance is rank deficient; minimum-norm solution used");
  fit.coefficients.b = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * gamma;
  fit.df = static_cast<double>(p) * static_cast<double>(q.m());
  return fit;
}

FitResult fit_lowrank(const DesignMatrix& x, const QuantileMatrix& q, const SolverConfig& cfg) {
  if (x.n() != q.n())
    throw InvalidInput("fit_lowrank: design and response have different observation counts");
  const int n = x.n();
  const int p = x.p();
  const int m = q.m();
  cfg.validate(n, p, m);

  const double nm = static_cast<double>(n) * static_cast<double>(m);
  const int r = cfg.prox.rank;
  const double lam1 = cfg.prox.lambda_l1;
  const double lamf = cfg.prox.lambda_fused;

  // Optional observation weights enter through row scaling by sqrt(w), which
  // reduces the weighted loss to the unweighted formulas below.
  Eigen::MatrixXd xc = x.centered();
  Eigen::MatrixXd qc = q.values.rowwise() - q.values.colwise().mean();
  if (!cfg.weights.empty()) {
    for (int i = 0; i < n; ++i) {
      const double s = std::sqrt(cfg.weights[static_cast<std::size_t>(i)]);
      xc.row(i) *= s;
      qc.row(i) *= s;
    }
  }

  // Smooth loss f(B) = (n*M)^-1 ||Qc - Xc B||_F^2 in Gram form; per-iteration
  // work then depends on p and M only.
  const Eigen::MatrixXd gram = xc.transpose() * xc;         // p x p
  const Eigen::MatrixXd cross = xc.transpose() * qc;        // p x M
  const double qnorm2 = qc.squaredNorm();
  const auto smooth_loss = [&](const Eigen::MatrixXd& b, const Eigen::MatrixXd& gram_b) {
    return (qnorm2 - 2.0 * (b.cwiseProduct(cross)).sum() + (b.cwiseProduct(gram_b)).sum()) / nm;
  };
  const auto objective = [&](double f, const Eigen::MatrixXd& b) {
    double obj = f;
    if (lam1 > 0.0) obj += lam1 * b.cwiseAbs().sum();
    if (lamf > 0.0) obj += lamf * fused_penalty(b);
    return obj;
  };

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw NumericalError("fit_lowrank: eigendecomposition failed");
  const double gram_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  const double lipschitz = 2.0 * gram_max / nm;

  FitResult fit{
      .intercept = q.values.colwise().mean().transpose(),
      .coefficients = CoefficientMatrix{Eigen::MatrixXd::Zero(p, m), q.grid, r},
      .column_means = x.column_means(),
      .method = "lowrank",
  };
  if (r > numerical_rank(xc))
    fit.warnings.push_back("rank constraint exceeds the numerical rank of the centered design");

  Eigen::MatrixXd b(p, m);
  if (cfg.init == InitMode::Random) {
    Rng rng(cfg.seed);
    for (int i = 0; i < p; ++i)
      for (int j = 0; j < m; ++j) b(i, j) = (rng.uniform() * 2.0 - 1.0) * 0.01;
  } else {
    b = svd_truncate(fit_ols(x, q).coefficients.b, r);
  }

  double alpha = cfg.step_init > 0.0 ? cfg.step_init
                 : lipschitz > 0.0   ? 1.0 / lipschitz
                                     : 1.0;
  const bool truncate = r < std::min(p, m);

  Eigen::MatrixXd gram_b = gram * b;
  double f_cur = smooth_loss(b, gram_b);
  double obj_cur = objective(f_cur, b);
  fit.objective_trace.push_back(obj_cur);
  const double obj_initial = obj_cur;

  for (int t = 1; t <= cfg.max_iters; ++t) {
    const Eigen::MatrixXd grad = 2.0 / nm * (gram_b - cross);

    Eigen::MatrixXd cand;
    Eigen::MatrixXd gram_cand;
    double f_cand = 0.0;
    bool exhausted = false;
    for (int halvings = 0;; ++halvings) {
      cand = b - alpha * grad;
      if (lam1 > 0.0) cand = soft_threshold(cand, alpha * lam1);
      if (lamf > 0.0) cand = fused_prox(cand, alpha * lamf);
      if (truncate) cand = svd_truncate(cand, r);
      if (!cand.allFinite()) throw NumericalError("fit_lowrank: iterate contains NaN/Inf");
      gram_cand = gram * cand;
      f_cand = smooth_loss(cand, gram_cand);
      const Eigen::MatrixXd diff = cand - b;
      const double quad = f_cur + grad.cwiseProduct(diff).sum() +
                          diff.squaredNorm() / (2.0 * alpha) +
                          1e-12 * (1.0 + std::abs(f_cur));
      if (f_cand <= quad) break;
      if (halvings >= kMaxHalvings) {
        exhausted = true;
        break;
      }
      alpha *= cfg.backtrack_factor;
    }

    const double obj_new = objective(f_cand, cand);
    if (std::isnan(obj_new)) throw NumericalError("fit_lowrank: objective is NaN");
    if (exhausted && obj_new > kDivergenceFactor * obj_initial)
      throw SolverDiverged("fit_lowrank: objective exceeded " +
                           std::to_string(kDivergenceFactor) +
                           " times its initial value with backtracking exhausted");

    const double change = (cand - b).norm();
    const double base = b.norm();

    b.swap(cand);
    gram_b.swap(gram_cand);
    f_cur = f_cand;
    if (obj_new > obj_cur + 1e-12 * (1.0 + std::abs(obj_cur))) ++fit.objective_increases;
    obj_cur = obj_new;
    fit.objective_trace.push_back(obj_new);
    fit.iterations = t;

    const double rel = base > 0.0 ? change / base : change;
    if (rel < cfg.tol) {
      fit.converged = true;
      break;
    }
    fit.converged = false;
  }

  if (fit.objective_increases > 0)
    fit.warnings.push_back("objective increased on " + std::to_string(fit.objective_increases) +
                           " accepted steps");

  fit.coefficients.b = b;
  fit.step_size_final = alpha;
  if (cfg.df_mode == DfMode::NonzeroCount) {
    fit.df = count_df(b);
  } else {
    const double rr = numerical_rank(b);
    fit.df = rr * (static_cast<double>(p) + static_cast<double>(m) - rr);
  }
  return fit;
}

Prediction predict(const FitResult& fit, const Eigen::VectorXd& x_new) {
  if (x_new.size() != fit.coefficients.b.rows())
    throw InvalidInput("predict: covariate vector length does not match the fit");
  if (!x_new.allFinite()) throw InvalidInput("predict: non-finite covariates");
  const Eigen::VectorXd raw =
      fit.intercept + fit.coefficients.b.transpose() * (x_new - fit.column_means);
  Eigen::VectorXd sorted = monotone_rearrange(raw);
  int moved = 0;
  for (Eigen::Index i = 0; i < raw.size(); ++i)
    if (raw[i] != sorted[i]) ++moved;
  return Prediction{QuantileVector(fit.coefficients.grid, std::move(sorted)), moved};
}

int numerical_rank(const Eigen::MatrixXd& b, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    throw InvalidInput("numerical_rank: rel_tol must lie in (0, 1)");
  if (!b.allFinite()) throw InvalidInput("numerical_rank: non-finite input");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(b);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] <= 0.0) return 0;
  const double cut = rel_tol * s[0];
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > cut) ++rank;
  return rank;
}

double rsc_smallest_eigenvalue(const Eigen::MatrixXd& d, int n_obs) {
  if (n_obs < 1) throw InvalidInput("rsc_smallest_eigenvalue: need positive n");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(d.transpose() * d /
                                                     static_cast<double>(n_obs));
  if (eig.info() != Eigen::Success)
    throw NumericalError("rsc_smallest_eigenvalue: eigendecomposition failed");
  return eig.eigenvalues().minCoeff();
}

double rsc_diagnostic(const DesignMatrix& x) {
  return rsc_smallest_eigenvalue(x.centered(), x.n());
}

}  // namespace fqr
