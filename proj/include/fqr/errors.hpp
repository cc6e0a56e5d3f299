#pragma once

#include <stdexcept>
#include <string>

namespace fqr {

/// Error taxonomy shared by the whole library. The CLI maps these onto its
/// exit classes: InvalidInput / GridMismatch are data errors, the remaining
/// types are numerical failures.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Two quantile objects evaluated on different grids were combined.
class GridMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A computation produced NaN/Inf or an otherwise unusable result.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The proximal solver ran away (objective blow-up after the backtracking
/// budget was exhausted).
class SolverDiverged : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A simulated dataset violated its own construction invariants.
class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every cell of a tuning grid failed to produce a usable fit.
class TuningFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fqr
