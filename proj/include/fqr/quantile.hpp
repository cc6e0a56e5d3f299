#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fqr/grid.hpp"

namespace fqr {

/// Tolerance used by the nondecreasing check: a step down of at most
/// tol * max(1, |level|) counts as a tie. Keeps rounding dust from flagging
/// analytically monotone sequences.
bool is_nondecreasing(const Eigen::VectorXd& v, double tol = 1e-12);

/// How empirical quantiles interpolate between order statistics.
enum class QuantileMethod {
  LowerInverse,  ///< left-continuous generalized inverse of the empirical CDF
  Interpolated,  ///< linear interpolation between adjacent order statistics
};

/// One quantile function sampled on a grid.
struct QuantileVector {
  QuantileVector(QuantileGrid g, Eigen::VectorXd v);

  int size() const { return static_cast<int>(values.size()); }
  bool monotone() const { return is_nondecreasing(values); }

  QuantileGrid grid;
  Eigen::VectorXd values;
};

/// n quantile functions sharing one grid; row i is observation i.
struct QuantileMatrix {
  QuantileMatrix(QuantileGrid g, Eigen::MatrixXd v);

  int n() const { return static_cast<int>(values.rows()); }
  int m() const { return static_cast<int>(values.cols()); }
  QuantileVector row(int i) const;

  QuantileGrid grid;
  Eigen::MatrixXd values;
};

/// Evaluates the empirical quantile function of each raw sample on the grid.
QuantileMatrix empirical_quantiles(const std::vector<std::vector<double>>& samples,
                                   const QuantileGrid& grid,
                                   QuantileMethod method = QuantileMethod::LowerInverse);

/// Sorts the vector ascending; the L2-closest nondecreasing sequence.
Eigen::VectorXd monotone_rearrange(const Eigen::VectorXd& v);

/// 2-Wasserstein distance between two quantile functions on the same grid,
/// sqrt of the grid average of squared differences. Throws GridMismatch when
/// the grids differ.
double wasserstein2(const QuantileVector& a, const QuantileVector& b);

}  // namespace fqr
