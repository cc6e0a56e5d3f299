#pragma once

#include <Eigen/Dense>
#include <utility>

#include "fqr/errors.hpp"

namespace fqr {

/// Covariate matrix with cached column means and the column-centered copy
/// used by every estimator.
class DesignMatrix {
 public:
  explicit DesignMatrix(Eigen::MatrixXd x) : x_(std::move(x)) {
    if (x_.rows() < 1 || x_.cols() < 1) throw InvalidInput("DesignMatrix: empty matrix");
    if (!x_.allFinite()) throw InvalidInput("DesignMatrix: non-finite entries");
    means_ = x_.colwise().mean();
    centered_ = x_.rowwise() - means_.transpose();
  }

  /// Wraps an already-centered matrix (column means are taken as zero).
  /// Intended for diagnostics and tests that reason about the centered design
  /// directly.
  static DesignMatrix from_centered(Eigen::MatrixXd xc) {
    DesignMatrix d(std::move(xc));
    d.means_.setZero();
    d.centered_ = d.x_;
    return d;
  }

  int n() const { return static_cast<int>(x_.rows()); }
  int p() const { return static_cast<int>(x_.cols()); }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& column_means() const { return means_; }
  const Eigen::MatrixXd& centered() const { return centered_; }

 private:
  Eigen::MatrixXd x_;
  Eigen::VectorXd means_;
  Eigen::MatrixXd centered_;
};

}  // namespace fqr
