#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "fqr/errors.hpp"

namespace fqr {

/// Evaluation grid on the open unit interval. Immutable after construction;
/// every quantile object in the library carries one and operations combining
/// two objects require their grids to be identical.
class QuantileGrid {
 public:
  /// Midpoint grid u_m = (m - 0.5) / M for m = 1..M.
  static QuantileGrid midpoint(int m) {
    if (m < 1) throw InvalidInput("QuantileGrid: grid size must be positive");
    std::vector<double> pts(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
      pts[static_cast<std::size_t>(i)] = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
    return QuantileGrid(std::move(pts));
  }

  explicit QuantileGrid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw InvalidInput("QuantileGrid: empty grid");
    double prev = 0.0;
    for (double u : points_) {
      if (!(u > prev && u < 1.0))
        throw InvalidInput("QuantileGrid: points must be strictly increasing inside (0, 1)");
      prev = u;
    }
  }

  int size() const { return static_cast<int>(points_.size()); }
  const std::vector<double>& points() const { return points_; }
  double operator[](int i) const { return points_[static_cast<std::size_t>(i)]; }

  bool operator==(const QuantileGrid& other) const { return points_ == other.points_; }
  bool operator!=(const QuantileGrid& other) const { return !(*this == other); }

 private:
  std::vector<double> points_;
};

}  // namespace fqr
