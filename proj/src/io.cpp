#include "fqr/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fqr/errors.hpp"
#include "fqr/version.hpp"

namespace fqr {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double parse_double(std::string_view token, const std::string& path) {
  double v = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end)
    throw InvalidInput("could not parse number '" + std::string(token) + "' in " + path);
  return v;
}

std::vector<double> parse_row(const std::string& line, const std::string& path) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= line.size()) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) comma = line.size();
    std::string_view token(line.data() + start, comma - start);
    // trim trailing carriage return from files written on other platforms
    while (!token.empty() && (token.back() == '\r' || token.back() == ' ')) token.remove_suffix(1);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    if (token.empty()) throw InvalidInput("empty field in " + path);
    out.push_back(parse_double(token, path));
    start = comma + 1;
  }
  return out;
}

std::vector<std::vector<double>> read_numeric_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    rows.push_back(parse_row(line, path));
    if (rows.back().size() != rows.front().size())
      throw InvalidInput("ragged rows in " + path);
  }
  if (rows.empty()) throw InvalidInput("no data rows in " + path);
  return rows;
}

Eigen::MatrixXd rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

void write_numeric_row(std::ofstream& out, const double* data, Eigen::Index count) {
  for (Eigen::Index j = 0; j < count; ++j) {
    if (j) out << ',';
    out << format_double(data[j]);
  }
  out << '\n';
}

void write_grid_matrix_csv(const std::string& path, const QuantileGrid& grid,
                           const Eigen::MatrixXd& values) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  for (int j = 0; j < grid.size(); ++j) {
    if (j) out << ',';
    out << format_double(grid[j]);
  }
  out << '\n';
  Eigen::MatrixXd row(1, values.cols());
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    row = values.row(i);
    write_numeric_row(out, row.data(), row.cols());
  }
}

std::pair<QuantileGrid, Eigen::MatrixXd> read_grid_matrix_csv(const std::string& path) {
  auto rows = read_numeric_rows(path);
  if (rows.size() < 2) throw InvalidInput("expected a grid header and data rows in " + path);
  QuantileGrid grid(rows.front());
  rows.erase(rows.begin());
  return {std::move(grid), rows_to_matrix(rows)};
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  if (rows.empty()) throw InvalidInput("fit JSON: empty matrix");
  const auto nr = static_cast<Eigen::Index>(rows.size());
  const auto nc = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd m(nr, nc);
  for (Eigen::Index i = 0; i < nr; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != nc) throw InvalidInput("fit JSON: ragged matrix");
    for (Eigen::Index j = 0; j < nc; ++j) m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
  }
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_quantile_csv(const std::string& path, const QuantileMatrix& q) {
  write_grid_matrix_csv(path, q.grid, q.values);
}

QuantileMatrix read_quantile_csv(const std::string& path) {
  auto [grid, values] = read_grid_matrix_csv(path);
  return QuantileMatrix(std::move(grid), std::move(values));
}

QuantileMatrix read_quantile_csv(const std::string& path, const QuantileGrid& expected) {
  QuantileMatrix q = read_quantile_csv(path);
  if (q.grid != expected) throw GridMismatch("grid in " + path + " does not match the expected grid");
  return q;
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  if (!header.empty()) {
    if (static_cast<Eigen::Index>(header.size()) != m.cols())
      throw InvalidInput("write_matrix_csv: header size does not match columns");
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j) out << ',';
      out << header[j];
    }
    out << '\n';
  }
  Eigen::MatrixXd row(1, m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    row = m.row(i);
    write_numeric_row(out, row.data(), row.cols());
  }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (first && has_header) {
      first = false;
      continue;
    }
    first = false;
    rows.push_back(parse_row(line, path));
    if (rows.back().size() != rows.front().size()) throw InvalidInput("ragged rows in " + path);
  }
  if (rows.empty()) throw InvalidInput("no data rows in " + path);
  return rows_to_matrix(rows);
}

void write_coefficients_csv(const std::string& path, const CoefficientMatrix& b) {
  write_grid_matrix_csv(path, b.grid, b.b);
}

CoefficientMatrix read_coefficients_csv(const std::string& path) {
  auto [grid, values] = read_grid_matrix_csv(path);
  return CoefficientMatrix{std::move(values), std::move(grid), std::nullopt};
}

nlohmann::json fit_to_json(const FitResult& fit) {
  json j;
  j["version"] = kVersion;
  j["method"] = fit.method;
  j["grid"] = fit.coefficients.grid.points();
  j["intercept"] = vector_to_json(fit.intercept);
  j["column_means"] = vector_to_json(fit.column_means);
  j["coefficients"] = matrix_to_json(fit.coefficients.b);
  if (fit.coefficients.rank_cap) j["rank_cap"] = *fit.coefficients.rank_cap;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["objective_trace"] = fit.objective_trace;
  j["step_size_final"] = fit.step_size_final;
  j["df"] = fit.df;
  j["pseudoinverse_used"] = fit.pseudoinverse_used;
  j["objective_increases"] = fit.objective_increases;
  j["warnings"] = fit.warnings;
  return j;
}

FitResult fit_from_json(const nlohmann::json& j) {
  try {
    QuantileGrid grid(j.at("grid").get<std::vector<double>>());
    FitResult fit{
        .intercept = vector_from_json(j.at("intercept")),
        .coefficients = CoefficientMatrix{matrix_from_json(j.at("coefficients")), grid,
                                          std::nullopt},
        .column_means = vector_from_json(j.at("column_means")),
        .method = j.at("method").get<std::string>(),
    };
    if (j.contains("rank_cap")) fit.coefficients.rank_cap = j["rank_cap"].get<int>();
    fit.iterations = j.value("iterations", 0);
    fit.converged = j.value("converged", true);
    if (j.contains("objective_trace"))
      fit.objective_trace = j["objective_trace"].get<std::vector<double>>();
    fit.step_size_final = j.value("step_size_final", 0.0);
    fit.df = j.value("df", 0.0);
    fit.pseudoinverse_used = j.value("pseudoinverse_used", false);
    fit.objective_increases = j.value("objective_increases", 0);
    if (j.contains("warnings")) fit.warnings = j["warnings"].get<std::vector<std::string>>();
    if (fit.intercept.size() != grid.size() ||
        fit.coefficients.b.cols() != grid.size() ||
        fit.column_means.size() != fit.coefficients.b.rows())
      throw InvalidInput("fit JSON: inconsistent shapes");
    return fit;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("fit JSON: ") + e.what());
  }
}

void write_fit_json(const std::string& path, const FitResult& fit) {
  write_json(path, fit_to_json(fit));
}

FitResult read_fit_json(const std::string& path) { return fit_from_json(read_json(path)); }

nlohmann::json tuning_to_json(const TuningReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    json jc;
    jc["lambda_l1"] = c.lambda_l1;
    jc["lambda_fused"] = c.lambda_fused;
    jc["rank"] = c.rank;
    jc["loglik"] = c.loglik;
    jc["df"] = c.df;
    jc["aic"] = c.aic;
    jc["bic"] = c.bic;
    jc["saic"] = c.saic;
    jc["sbic"] = c.sbic;
    jc["perfect_fit"] = c.perfect_fit;
    jc["failed"] = c.failed;
    if (c.failed) jc["error"] = c.error;
    cells.push_back(std::move(jc));
  }
  json j;
  j["version"] = kVersion;
  j["criterion"] = report.criterion_used == Criterion::SAic ? "saic" : "sbic";
  j["selected_index"] = report.selected_index;
  j["cells"] = std::move(cells);
  return j;
}

void write_tuning_csv(const std::string& path, const TuningReport& report) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out << "cell,lambda_l1,lambda_fused,rank,loglik,df,aic,bic,saic,sbic,perfect_fit,failed,"
         "selected\n";
  for (std::size_t k = 0; k < report.cells.size(); ++k) {
    const auto& c = report.cells[k];
    out << k << ',' << format_double(c.lambda_l1) << ',' << format_double(c.lambda_fused) << ','
        << c.rank << ',' << format_double(c.loglik) << ',' << format_double(c.df) << ','
        << format_double(c.aic) << ',' << format_double(c.bic) << ',' << format_double(c.saic)
        << ',' << format_double(c.sbic) << ',' << (c.perfect_fit ? 1 : 0) << ','
        << (c.failed ? 1 : 0) << ',' << (static_cast<int>(k) == report.selected_index ? 1 : 0)
        << '\n';
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path);
  out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput("invalid JSON in " + path + ": " + e.what());
  }
}

void write_dataset(const std::string& dir, const SimulatedDataset& ds,
                   const nlohmann::json& extra_meta) {
  fs::create_directories(dir);
  write_matrix_csv((fs::path(dir) / "X.csv").string(), ds.x.x());
  write_quantile_csv((fs::path(dir) / "Q.csv").string(), ds.q);
  write_coefficients_csv((fs::path(dir) / "trueB.csv").string(), ds.true_b);
  json meta;
  meta["version"] = kVersion;
  meta["design"] = ds.design;
  meta["n"] = ds.x.n();
  meta["p"] = ds.x.p();
  meta["m"] = ds.q.m();
  meta["true_center"] = ds.true_center;
  meta["true_intercept"] = vector_to_json(ds.true_intercept);
  meta["repair_count"] = ds.repair_count;
  if (!extra_meta.is_null()) meta["config"] = extra_meta;
  write_json((fs::path(dir) / "meta.json").string(), meta);
}

StoredDataset read_dataset(const std::string& dir) {
  const fs::path base(dir);
  if (!fs::exists(base / "X.csv") || !fs::exists(base / "Q.csv"))
    throw InvalidInput("dataset directory " + dir + " must contain X.csv and Q.csv");
  StoredDataset out{
      .x = read_matrix_csv((base / "X.csv").string(), false),
      .q = read_quantile_csv((base / "Q.csv").string()),
      .true_b = std::nullopt,
      .true_intercept = std::nullopt,
      .meta = json::object(),
  };
  if (fs::exists(base / "trueB.csv"))
    out.true_b = read_coefficients_csv((base / "trueB.csv").string());
  if (fs::exists(base / "meta.json")) {
    out.meta = read_json((base / "meta.json").string());
    if (out.meta.contains("true_intercept"))
      out.true_intercept = vector_from_json(out.meta["true_intercept"]);
  }
  if (out.x.rows() != out.q.n())
    throw InvalidInput("dataset " + dir + ": X.csv and Q.csv row counts differ");
  return out;
}

}  // namespace fqr
