#include "fqr/quantile.hpp"

#include <algorithm>
#include <cmath>

#include "fqr/errors.hpp"

namespace fqr {

bool is_nondecreasing(const Eigen::VectorXd& v, double tol) {
  for (Eigen::Index i = 0; i + 1 < v.size(); ++i) {
    const double slack = tol * std::max(1.0, std::abs(v[i]));
    if (v[i + 1] < v[i] - slack) return false;
  }
  return true;
}

QuantileVector::QuantileVector(QuantileGrid g, Eigen::VectorXd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.size())
    throw InvalidInput("QuantileVector: value count does not match grid size");
  if (!values.allFinite()) throw InvalidInput("QuantileVector: non-finite values");
}

QuantileMatrix::QuantileMatrix(QuantileGrid g, Eigen::MatrixXd v)
    : grid(std::move(g)), values(std::move(v)) {
  if (values.cols() != grid.size())
    throw InvalidInput("QuantileMatrix: column count does not match grid size");
  if (!values.allFinite()) throw InvalidInput("QuantileMatrix: non-finite values");
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    if (!is_nondecreasing(values.row(i).transpose()))
      throw InvalidInput("QuantileMatrix: row " + std::to_string(i) + " is not nondecreasing");
  }
}

QuantileVector QuantileMatrix::row(int i) const {
  if (i < 0 || i >= n()) throw InvalidInput("QuantileMatrix::row: index out of range");
  return QuantileVector(grid, values.row(i).transpose());
}

QuantileMatrix empirical_quantiles(const std::vector<std::vector<double>>& samples,
                                   const QuantileGrid& grid, QuantileMethod method) {
  if (samples.empty()) throw InvalidInput("empirical_quantiles: no samples");
  const int m = grid.size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(samples.size()), m);
  std::vector<double> sorted;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& raw = samples[i];
    if (raw.empty())
      throw InvalidInput("empirical_quantiles: sample " + std::to_string(i) + " is empty");
    for (double x : raw) {
      if (!std::isfinite(x))
        throw InvalidInput("empirical_quantiles: sample " + std::to_string(i) +
                           " contains a non-finite value");
    }
    sorted = raw;
    std::sort(sorted.begin(), sorted.end());
    const double ns = static_cast<double>(sorted.size());
    for (int j = 0; j < m; ++j) {
      const double u = grid[j];
      if (method == QuantileMethod::LowerInverse) {
        // Q(u) = inf{ s : Fhat(s) >= u } = x_(ceil(ns * u)); the tiny nudge
        // keeps exact multiples of 1/ns from rounding up.
        auto k = static_cast<std::ptrdiff_t>(std::ceil(ns * u - 1e-12));
        k = std::clamp<std::ptrdiff_t>(k, 1, static_cast<std::ptrdiff_t>(sorted.size()));
        out(static_cast<Eigen::Index>(i), j) = sorted[static_cast<std::size_t>(k - 1)];
      } else {
        const double h = (ns - 1.0) * u;
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = h - std::floor(h);
        out(static_cast<Eigen::Index>(i), j) = sorted[lo] + frac * (sorted[hi] - sorted[lo]);
      }
    }
  }
  return QuantileMatrix(grid, std::move(out));
}

Eigen::VectorXd monotone_rearrange(const Eigen::VectorXd& v) {
  if (!v.allFinite()) throw InvalidInput("monotone_rearrange: non-finite values");
  std::vector<double> tmp(v.data(), v.data() + v.size());
  std::sort(tmp.begin(), tmp.end());
  return Eigen::Map<const Eigen::VectorXd>(tmp.data(), static_cast<Eigen::Index>(tmp.size()));
}

double wasserstein2(const QuantileVector& a, const QuantileVector& b) {
  if (a.grid != b.grid) throw GridMismatch("wasserstein2: quantile grids differ");
  const double msq = (a.values - b.values).squaredNorm() / static_cast<double>(a.size());
  return std::sqrt(msq);
}

}  // namespace fqr
