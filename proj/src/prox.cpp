#include "fqr/prox.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fqr {

void ProxConfig::validate(int p, int m) const {
  if (!(lambda_l1 >= 0.0) || !(lambda_fused >= 0.0))
    throw InvalidInput("ProxConfig: penalty weights must be nonnegative");
  const int cap = std::min(p, m);
  if (rank < 1 || rank > cap)
    throw InvalidInput("ProxConfig: rank must lie in [1, min(p, M)] = [1, " +
                       std::to_string(cap) + "], got " + std::to_string(rank));
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& v, double gamma) {
  if (!(gamma >= 0.0)) throw InvalidInput("soft_threshold: gamma must be nonnegative");
  if (!v.allFinite()) throw InvalidInput("soft_threshold: non-finite input");
  return v.unaryExpr([gamma](double x) {
    const double mag = std::abs(x) - gamma;
    return mag > 0.0 ? (x > 0.0 ? mag : -mag) : 0.0;
  });
}

// Direct 1D total-variation denoiser. Scans left to right keeping the current
// segment's candidate value bounds (vmin, vmax) and slack accumulators
// (umin, umax); a bound violation emits a finished segment and restarts after
// it. Each element is written exactly once, so the typical cost is linear.
Eigen::VectorXd fused_prox_row(const Eigen::VectorXd& v, double gamma) {
  if (!(gamma >= 0.0)) throw InvalidInput("fused_prox_row: gamma must be nonnegative");
  if (v.size() == 0) throw InvalidInput("fused_prox_row: empty input");
  if (!v.allFinite()) throw InvalidInput("fused_prox_row: non-finite input");

  const int width = static_cast<int>(v.size());
  Eigen::VectorXd out(width);
  if (width == 1) {
    out[0] = v[0];
    return out;
  }

  int k = 0, k0 = 0;       // current sample, start of current segment
  int kminus = 0, kplus = 0;  // last positions where umin/umax touched a bound
  double umin = gamma, umax = -gamma;
  double vmin = v[0] - gamma, vmax = v[0] + gamma;
  const double twogamma = 2.0 * gamma;

  for (;;) {
    while (k == width - 1) {  // right boundary: flush the remaining segment(s)
      if (umin < 0.0) {  // vmin too high, a downward jump is forced
        do out[k0++] = vmin;
        while (k0 <= kminus);
        kminus = k = k0;
        vmin = v[kminus];
        umin = gamma;
        umax = vmin + umin - vmax;
      } else if (umax > 0.0) {  // vmax too low, an upward jump is forced
        do out[k0++] = vmax;
        while (k0 <= kplus);
        kplus = k = k0;
        vmax = v[kplus];
        umax = -gamma;
        umin = vmax + umax - vmin;
      } else {
        vmin += umin / static_cast<double>(k - k0 + 1);
        do out[k0++] = vmin;
        while (k0 <= k);
        return out;
      }
    }
    umin += v[k + 1] - vmin;
    if (umin < -gamma) {  // downward jump at the end of the current segment
      do out[k0++] = vmin;
      while (k0 <= kminus);
      kplus = kminus = k = k0;
      vmin = v[k0];
      vmax = vmin + twogamma;
      umin = gamma;
      umax = -gamma;
    } else {
      umax += v[k + 1] - vmax;
      if (umax > gamma) {  // upward jump
        do out[k0++] = vmax;
        while (k0 <= kplus);
        kplus = kminus = k = k0;
        vmax = v[k0];
        vmin = vmax - twogamma;
        umin = gamma;
        umax = -gamma;
      } else {  // the segment absorbs the new sample
        ++k;
        if (umin >= gamma) {
          kminus = k;
          vmin += (umin - gamma) / static_cast<double>(kminus - k0 + 1);
          umin = gamma;
        }
        if (umax <= -gamma) {
          kplus = k;
          vmax += (umax + gamma) / static_cast<double>(kplus - k0 + 1);
          umax = -gamma;
        }
      }
    }
  }
}

Eigen::MatrixXd fused_prox(const Eigen::MatrixXd& b, double gamma) {
  Eigen::MatrixXd out(b.rows(), b.cols());
  for (Eigen::Index i = 0; i < b.rows(); ++i)
    out.row(i) = fused_prox_row(b.row(i).transpose(), gamma).transpose();
  return out;
}

namespace {

// A BDCSVD result can silently go bad on some sparse inputs (NaN factors,
// out-of-order singular values) while still reporting success, so validate
// before trusting it.
template <class Svd>
bool svd_usable(const Svd& svd) {
  if (svd.info() != Eigen::Success) return false;
  if (!svd.matrixU().allFinite() || !svd.matrixV().allFinite()) return false;
  const auto& s = svd.singularValues();
  if (!s.allFinite()) return false;
  for (Eigen::Index i = 1; i < s.size(); ++i)
    if (s[i] > s[i - 1]) return false;
  return true;
}

}  // namespace

Eigen::MatrixXd svd_truncate(const Eigen::MatrixXd& b, int rank) {
  const int cap = static_cast<int>(std::min(b.rows(), b.cols()));
  if (rank < 1 || rank > cap)
    throw InvalidInput("svd_truncate: rank must lie in [1, min(rows, cols)]");
  if (!b.allFinite()) throw InvalidInput("svd_truncate: non-finite input");
  if (rank == cap) return b;  // projection onto the full-rank set is the identity

  Eigen::BDCSVD<Eigen::MatrixXd> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd_usable(svd)) {
    const auto& s = svd.singularValues();
    return svd.matrixU().leftCols(rank) * s.head(rank).asDiagonal() *
           svd.matrixV().leftCols(rank).transpose();
  }
  // Slower but dependable fallback.
  Eigen::JacobiSVD<Eigen::MatrixXd> jac(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (!svd_usable(jac)) throw NumericalError("svd_truncate: SVD failed to converge");
  const auto& s = jac.singularValues();
  return jac.matrixU().leftCols(rank) * s.head(rank).asDiagonal() *
         jac.matrixV().leftCols(rank).transpose();
}

}  // namespace fqr
