#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fqr/estimators.hpp"
#include "fqr/quantile.hpp"
#include "fqr/selection.hpp"
#include "fqr/simulate.hpp"

namespace fqr {

/// Decimal form with 17 significant digits, enough to round-trip any double
/// exactly.
std::string format_double(double v);

/// Quantile matrices serialize with a header row holding the grid points,
/// then one data row per observation.
void write_quantile_csv(const std::string& path, const QuantileMatrix& q);
QuantileMatrix read_quantile_csv(const std::string& path);
/// Read variant that fails with GridMismatch unless the file's grid equals
/// `expected`.
QuantileMatrix read_quantile_csv(const std::string& path, const QuantileGrid& expected);

/// Plain numeric CSV with an optional header row.
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header = {});
Eigen::MatrixXd read_matrix_csv(const std::string& path, bool has_header);

/// Coefficient matrices use the quantile layout: grid header row, then one
/// row per covariate.
void write_coefficients_csv(const std::string& path, const CoefficientMatrix& b);
CoefficientMatrix read_coefficients_csv(const std::string& path);

nlohmann::json fit_to_json(const FitResult& fit);
FitResult fit_from_json(const nlohmann::json& j);
void write_fit_json(const std::string& path, const FitResult& fit);
FitResult read_fit_json(const std::string& path);

nlohmann::json tuning_to_json(const TuningReport& report);
void write_tuning_csv(const std::string& path, const TuningReport& report);

void write_json(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json(const std::string& path);

/// Writes X.csv, Q.csv, trueB.csv and meta.json into dir (created if needed).
void write_dataset(const std::string& dir, const SimulatedDataset& ds,
                   const nlohmann::json& extra_meta = {});

/// A dataset read back from a run directory; truth fields are present only
/// when trueB.csv / meta.json carry them.
struct StoredDataset {
  Eigen::MatrixXd x;
  QuantileMatrix q;
  std::optional<CoefficientMatrix> true_b;
  std::optional<Eigen::VectorXd> true_intercept;
  nlohmann::json meta;
};
StoredDataset read_dataset(const std::string& dir);

}  // namespace fqr
