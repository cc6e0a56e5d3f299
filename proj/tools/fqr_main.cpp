// Command-line front end: dataset simulation, fitting, tuning, prediction,
// evaluation, Monte Carlo benchmarks, and plot-data emission. Every command
// resolves its configuration (JSON config file, then command-line overrides),
// writes its artifacts into one run directory, and echoes the resolved
// configuration into manifest.json so a run can be reproduced byte for byte.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fqr/benchmark.hpp"
#include "fqr/errors.hpp"
#include "fqr/estimators.hpp"
#include "fqr/io.hpp"
#include "fqr/metrics.hpp"
#include "fqr/rng.hpp"
#include "fqr/selection.hpp"
#include "fqr/simulate.hpp"
#include "fqr/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Configuration plumbing
// ---------------------------------------------------------------------------

/// Output directory resolution: an absolute path is used as given; a relative
/// path (or the command's default name) is joined under FQR_OUTPUT_ROOT when
/// that variable is set, else under the working directory.
std::string resolve_out(const std::string& out, const std::string& fallback) {
  fs::path p = out.empty() ? fs::path(fallback) : fs::path(out);
  if (p.is_absolute()) return p.string();
  const char* root = std::getenv("FQR_OUTPUT_ROOT");
  if (root != nullptr && *root != '\0') return (fs::path(root) / p).string();
  return p.string();
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  json cfg = fqr::read_json(path);
  if (!cfg.is_object()) throw fqr::InvalidInput("config file must hold a JSON object: " + path);
  return cfg;
}

/// Applies cfg[key] to target unless the flag was given on the command line
/// (command-line values win over the config file).
template <class T>
void fill(const CLI::App& cmd, const json& cfg, const std::string& flag, const std::string& key,
          T& target) {
  if (cmd.get_option(flag)->count() > 0) return;
  if (!cfg.contains(key)) return;
  try {
    target = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw fqr::InvalidInput("config key '" + key + "': " + e.what());
  }
}

/// Manifest written by every command: semantic version, the command name, the
/// fully resolved configuration, and the files the run produced. Contains no
/// timestamps so a rerun with the same inputs is byte-identical.
void write_manifest(const std::string& dir, const std::string& command, const json& config,
                    const std::vector<std::string>& outputs) {
  json m;
  m["version"] = fqr::kVersion;
  m["command"] = command;
  m["config"] = config;
  m["outputs"] = outputs;
  fqr::write_json((fs::path(dir) / "manifest.json").string(), m);
}

int parse_rank(const std::string& text, int p, int m) {
  if (text == "full") return std::min(p, m);
  try {
    std::size_t used = 0;
    const int r = std::stoi(text, &used);
    if (used != text.size() || r < 1) throw std::invalid_argument(text);
    return r;
  } catch (const std::exception&) {
    throw fqr::InvalidInput("--rank must be a positive integer or 'full', got '" + text + "'");
  }
}

fqr::Criterion parse_criterion(const std::string& s) {
  if (s == "saic") return fqr::Criterion::SAic;
  if (s == "sbic") return fqr::Criterion::SBic;
  throw fqr::InvalidInput("--criterion must be saic or sbic, got '" + s + "'");
}

fqr::ScaleMode parse_scale_mode(const std::string& s) {
  if (s == "inv_p") return fqr::ScaleMode::InvP;
  if (s == "inv_sqrt_p") return fqr::ScaleMode::InvSqrtP;
  throw fqr::InvalidInput("--scale-mode must be inv_p or inv_sqrt_p, got '" + s + "'");
}

fqr::InitMode parse_init(const std::string& s) {
  if (s == "random") return fqr::InitMode::Random;
  if (s == "warmols") return fqr::InitMode::WarmOls;
  throw fqr::InvalidInput("--init must be random or warmols, got '" + s + "'");
}

// ---------------------------------------------------------------------------
// Shared option blocks
// ---------------------------------------------------------------------------

/// Data source: a simulate-style run directory, or explicit CSV paths.
struct DataOpts {
  std::string data_dir;
  std::string x_path;
  std::string q_path;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--data", data_dir, "run directory holding X.csv and Q.csv");
    cmd->add_option("--x", x_path, "covariate CSV (no header); overrides --data");
    cmd->add_option("--q", q_path, "quantile CSV with grid header; overrides --data");
  }
  void fill_from(const CLI::App& cmd, const json& cfg) {
    fill(cmd, cfg, "--data", "data", data_dir);
    fill(cmd, cfg, "--x", "x", x_path);
    fill(cmd, cfg, "--q", "q", q_path);
  }
  json echo() const {
    json j;
    if (!data_dir.empty()) j["data"] = data_dir;
    if (!x_path.empty()) j["x"] = x_path;
    if (!q_path.empty()) j["q"] = q_path;
    return j;
  }

  fqr::StoredDataset load() const {
    if (!x_path.empty() || !q_path.empty()) {
      if (x_path.empty() || q_path.empty())
        throw fqr::InvalidInput("--x and --q must be given together");
      return fqr::StoredDataset{
          .x = fqr::read_matrix_csv(x_path, false),
          .q = fqr::read_quantile_csv(q_path),
          .true_b = std::nullopt,
          .true_intercept = std::nullopt,
          .meta = json::object(),
      };
    }
    if (data_dir.empty()) throw fqr::InvalidInput("either --data or --x/--q is required");
    return fqr::read_dataset(data_dir);
  }
};

/// Proximal-solver knobs shared by fit, tune, and plotdata. Defaults mirror
/// the benchmark solver settings (least-squares warm start, long iteration
/// budget) rather than the library constructor defaults.
struct SolverOpts {
  std::string rank = "full";
  double lambda = 0.0;
  double lambda_fused = 0.0;
  int max_iters = 3000;
  double tol = 1e-5;
  std::string init = "warmols";
  std::uint64_t seed = 0;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--rank", rank, "rank constraint: positive integer or 'full'");
    cmd->add_option("--lambda", lambda, "l1 penalty weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--lambda-fused", lambda_fused, "fused (total-variation) penalty weight")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--max-iters", max_iters, "iteration budget")->check(CLI::PositiveNumber);
    cmd->add_option("--tol", tol, "relative-change convergence tolerance")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--init", init, "iterate initialization")
        ->check(CLI::IsMember({"random", "warmols"}));
    cmd->add_option("--seed", seed, "solver seed (random initialization)");
  }
  void fill_from(const CLI::App& cmd, const json& cfg) {
    fill(cmd, cfg, "--rank", "rank", rank);
    fill(cmd, cfg, "--lambda", "lambda", lambda);
    fill(cmd, cfg, "--lambda-fused", "lambda_fused", lambda_fused);
    fill(cmd, cfg, "--max-iters", "max_iters", max_iters);
    fill(cmd, cfg, "--tol", "tol", tol);
    fill(cmd, cfg, "--init", "init", init);
    fill(cmd, cfg, "--seed", "seed", seed);
  }
  json echo() const {
    return json{{"rank", rank},         {"lambda", lambda}, {"lambda_fused", lambda_fused},
                {"max_iters", max_iters}, {"tol", tol},     {"init", init},
                {"seed", seed}};
  }

  fqr::SolverConfig to_solver(int p, int m) const {
    fqr::SolverConfig s = fqr::benchmark_solver_defaults();
    s.prox.lambda_l1 = lambda;
    s.prox.lambda_fused = lambda_fused;
    s.prox.rank = parse_rank(rank, p, m);
    s.max_iters = max_iters;
    s.tol = tol;
    s.init = parse_init(init);
    s.seed = seed;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Small output helpers
// ---------------------------------------------------------------------------

void write_trace_csv(const std::string& path, const fqr::FitResult& fit) {
  Eigen::MatrixXd t(static_cast<Eigen::Index>(fit.objective_trace.size()), 2);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    t(i, 0) = static_cast<double>(i + 1);
    t(i, 1) = fit.objective_trace[static_cast<std::size_t>(i)];
  }
  fqr::write_matrix_csv(path, t, {"iteration", "objective"});
}

/// fit.json + Bhat.csv + trace.csv into dir; returns the file names.
std::vector<std::string> write_fit_artifacts(const std::string& dir, const fqr::FitResult& fit) {
  fqr::write_fit_json((fs::path(dir) / "fit.json").string(), fit);
  fqr::write_coefficients_csv((fs::path(dir) / "Bhat.csv").string(), fit.coefficients);
  write_trace_csv((fs::path(dir) / "trace.csv").string(), fit);
  return {"fit.json", "Bhat.csv", "trace.csv"};
}

fqr::QuantileMatrix predict_rows(const fqr::FitResult& fit, const Eigen::MatrixXd& x,
                                 std::vector<int>* rearranged = nullptr) {
  Eigen::MatrixXd rows(x.rows(), fit.coefficients.b.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    fqr::Prediction pr = fqr::predict(fit, x.row(i).transpose());
    rows.row(i) = pr.quantiles.values.transpose();
    if (rearranged != nullptr) rearranged->push_back(pr.rearranged_positions);
  }
  return {fit.coefficients.grid, std::move(rows)};
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOpts {
  std::string config_path;
  std::string out;
  std::string design = "warping";
  int n = 50;
  int p = 25;
  int grid_size = 100;
  std::uint64_t seed = 0;
  // warping design
  int r_true = 5;
  double rho = 0.9;
  int k_warp = 50;
  std::string scale_mode = "inv_p";
  // factor design
  int k_factors = 2;
  double noise_sd = 2.0;
};

void add_simulate(CLI::App& app, SimulateOpts& o) {
  CLI::App* cmd = app.add_subcommand("simulate", "generate a synthetic dataset run directory");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--out", o.out, "output directory (default simulate-out)");
  cmd->add_option("--design", o.design, "data-generating design")
      ->check(CLI::IsMember({"warping", "factor"}));
  cmd->add_option("--n", o.n, "observations")->check(CLI::PositiveNumber);
  cmd->add_option("--p", o.p, "covariates")->check(CLI::PositiveNumber);
  cmd->add_option("--grid-size", o.grid_size, "quantile grid size")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "generator seed");
  cmd->add_option("--r-true", o.r_true, "warping: true coefficient rank")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--rho", o.rho, "warping: copula AR(1) parameter");
  cmd->add_option("--k-warp", o.k_warp, "warping: response warp mixture size")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--scale-mode", o.scale_mode, "warping: coefficient scale decay")
      ->check(CLI::IsMember({"inv_p", "inv_sqrt_p"}));
  cmd->add_option("--k-factors", o.k_factors, "factor: latent factor count")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--noise-sd", o.noise_sd, "factor: pre-rearrangement cell noise")
      ->check(CLI::NonNegativeNumber);

  cmd->callback([cmd, &o] {
    const json cfg = load_config_file(o.config_path);
    fill(*cmd, cfg, "--out", "out", o.out);
    fill(*cmd, cfg, "--design", "design", o.design);
    fill(*cmd, cfg, "--n", "n", o.n);
    fill(*cmd, cfg, "--p", "p", o.p);
    fill(*cmd, cfg, "--grid-size", "grid_size", o.grid_size);
    fill(*cmd, cfg, "--seed", "seed", o.seed);
    fill(*cmd, cfg, "--r-true", "r_true", o.r_true);
    fill(*cmd, cfg, "--rho", "rho", o.rho);
    fill(*cmd, cfg, "--k-warp", "k_warp", o.k_warp);
    fill(*cmd, cfg, "--scale-mode", "scale_mode", o.scale_mode);
    fill(*cmd, cfg, "--k-factors", "k_factors", o.k_factors);
    fill(*cmd, cfg, "--noise-sd", "noise_sd", o.noise_sd);

    const std::string dir = resolve_out(o.out, "simulate-out");
    json echo{{"design", o.design},
              {"n", o.n},
              {"p", o.p},
              {"grid_size", o.grid_size},
              {"seed", o.seed}};
    fqr::SimulatedDataset ds = [&] {
      if (o.design == "warping") {
        fqr::WarpingConfig wc;
        wc.n = o.n;
        wc.p = o.p;
        wc.m_grid = o.grid_size;
        wc.r_true = o.r_true;
        wc.rho = o.rho;
        wc.k_warp = o.k_warp;
        wc.scale_mode = parse_scale_mode(o.scale_mode);
        wc.seed = o.seed;
        echo["r_true"] = o.r_true;
        echo["rho"] = o.rho;
        echo["k_warp"] = o.k_warp;
        echo["scale_mode"] = o.scale_mode;
        return fqr::gen_warping_dataset(wc);
      }
      fqr::FactorConfig fc;
      fc.n = o.n;
      fc.p = o.p;
      fc.m_quantiles = o.grid_size;
      fc.k_factors = o.k_factors;
      fc.noise_sd = o.noise_sd;
      fc.seed = o.seed;
      echo["k_factors"] = o.k_factors;
      echo["noise_sd"] = o.noise_sd;
      return fqr::gen_factor_dataset(fc);
    }();
    fqr::write_dataset(dir, ds, echo);
    write_manifest(dir, "simulate", echo, {"X.csv", "Q.csv", "trueB.csv", "meta.json"});
  });
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitOpts {
  std::string config_path;
  std::string out;
  std::string method = "lowrank";
  DataOpts data;
  SolverOpts solver;
};

void add_fit(CLI::App& app, FitOpts& o) {
  CLI::App* cmd = app.add_subcommand("fit", "fit one model and write its artifacts");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--out", o.out, "output directory (default fit-out)");
  cmd->add_option("--method", o.method, "estimator")->check(CLI::IsMember({"ols", "lowrank"}));
  o.data.add_flags(cmd);
  o.solver.add_flags(cmd);

  cmd->callback([cmd, &o] {
    const json cfg = load_config_file(o.config_path);
    fill(*cmd, cfg, "--out", "out", o.out);
    fill(*cmd, cfg, "--method", "method", o.method);
    o.data.fill_from(*cmd, cfg);
    o.solver.fill_from(*cmd, cfg);

    const fqr::StoredDataset ds = o.data.load();
    const fqr::DesignMatrix x(ds.x);
    const std::string dir = resolve_out(o.out, "fit-out");
    fs::create_directories(dir);

    fqr::FitResult fit =
        o.method == "ols"
            ? fqr::fit_ols(x, ds.q)
            : fqr::fit_lowrank(x, ds.q, o.solver.to_solver(x.p(), ds.q.m()));
    const std::vector<std::string> outputs = write_fit_artifacts(dir, fit);

    json echo = o.data.echo();
    echo["method"] = o.method;
    if (o.method == "lowrank") echo.update(o.solver.echo());
    write_manifest(dir, "fit", echo, outputs);
  });
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

struct TuneOpts {
  std::string config_path;
  std::string out;
  std::string criterion = "saic";
  std::string bic_n = "observations";
  std::vector<double> l1_grid;     // absolute weights; empty = data-driven ladder
  std::vector<double> fused_grid;  // absolute weights; empty = data-driven ladder
  int threads = 1;
  DataOpts data;
  SolverOpts solver;
};

void add_tune(CLI::App& app, TuneOpts& o) {
  CLI::App* cmd =
      app.add_subcommand("tune", "fit a penalty grid, select by smoothed information criterion");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--out", o.out, "output directory (default tune-out)");
  cmd->add_option("--criterion", o.criterion, "selection criterion")
      ->check(CLI::IsMember({"saic", "sbic"}));
  cmd->add_option("--bic-n", o.bic_n, "BIC sample-size convention")
      ->check(CLI::IsMember({"observations", "total_residuals"}));
  cmd->add_option("--l1-grid", o.l1_grid,
                  "absolute l1 weights (default: fractions of the data-driven bound)")
      ->delimiter(',');
  cmd->add_option("--fused-grid", o.fused_grid,
                  "absolute fused weights (default: fractions of the data-driven bound)")
      ->delimiter(',');
  cmd->add_option("--threads", o.threads, "worker threads across grid cells")
      ->check(CLI::PositiveNumber);
  o.data.add_flags(cmd);
  o.solver.add_flags(cmd);

  cmd->callback([cmd, &o] {
    const json cfg = load_config_file(o.config_path);
    fill(*cmd, cfg, "--out", "out", o.out);
    fill(*cmd, cfg, "--criterion", "criterion", o.criterion);
    fill(*cmd, cfg, "--bic-n", "bic_n", o.bic_n);
    fill(*cmd, cfg, "--l1-grid", "l1_grid", o.l1_grid);
    fill(*cmd, cfg, "--fused-grid", "fused_grid", o.fused_grid);
    fill(*cmd, cfg, "--threads", "threads", o.threads);
    o.data.fill_from(*cmd, cfg);
    o.solver.fill_from(*cmd, cfg);

    const fqr::StoredDataset ds = o.data.load();
    const fqr::DesignMatrix x(ds.x);
    const int rank = parse_rank(o.solver.rank, x.p(), ds.q.m());

    std::vector<double> l1 = o.l1_grid;
    std::vector<double> fused = o.fused_grid;
    if (l1.empty() || fused.empty()) {
      const auto [l1_max, fused_max] = fqr::penalty_anchors(x, ds.q);
      const fqr::WarpingBenchConfig ladder_defaults;
      if (l1.empty())
        for (double f : ladder_defaults.l1_fractions) l1.push_back(f * l1_max);
      if (fused.empty())
        for (double f : ladder_defaults.fused_fractions) fused.push_back(f * fused_max);
    }

    // l1 outer, fused inner: cell index = i_l1 * fused.size() + i_fused.
    std::vector<fqr::ProxConfig> grid;
    for (double ll : l1)
      for (double lf : fused) grid.push_back({.lambda_l1 = ll, .lambda_fused = lf, .rank = rank});

    fqr::SolverConfig base = o.solver.to_solver(x.p(), ds.q.m());
    fqr::TuneOptions topts;
    topts.criterion = parse_criterion(o.criterion);
    topts.bic_n = o.bic_n == "observations" ? fqr::BicSampleSize::Observations
                                            : fqr::BicSampleSize::TotalResiduals;
    topts.threads = o.threads;
    const std::string dir = resolve_out(o.out, "tune-out");
    fs::create_directories(dir);

    fqr::TuneOutcome outcome = fqr::tune_with_fit(x, ds.q, grid, base, topts);
    fqr::write_tuning_csv((fs::path(dir) / "tuning.csv").string(), outcome.report);
    fqr::write_json((fs::path(dir) / "tuning.json").string(),
                    fqr::tuning_to_json(outcome.report));
    std::vector<std::string> outputs = write_fit_artifacts(dir, outcome.best);
    outputs.insert(outputs.begin(), {"tuning.csv", "tuning.json"});

    json echo = o.data.echo();
    echo.update(o.solver.echo());
    echo["criterion"] = o.criterion;
    echo["bic_n"] = o.bic_n;
    echo["l1_grid"] = l1;
    echo["fused_grid"] = fused;
    echo["threads"] = o.threads;
    write_manifest(dir, "tune", echo, outputs);
  });
}

// ---------------------------------------------------------------------------
// predict
// ---------------------------------------------------------------------------

struct PredictOpts {
  std::string config_path;
  std::string out;
  std::string fit_path;
  std::string x_path;
};

void add_predict(CLI::App& app, PredictOpts& o) {
  CLI::App* cmd = app.add_subcommand("predict", "evaluate a stored fit at new covariates");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--out", o.out, "output directory (default predict-out)");
  cmd->add_option("--fit", o.fit_path, "fit.json produced by fit or tune");
  cmd->add_option("--x", o.x_path, "covariate CSV (no header)");

  cmd->callback([cmd, &o] {
    const json cfg = load_config_file(o.config_path);
    fill(*cmd, cfg, "--out", "out", o.out);
    fill(*cmd, cfg, "--fit", "fit", o.fit_path);
    fill(*cmd, cfg, "--x", "x", o.x_path);
    if (o.fit_path.empty() || o.x_path.empty())
      throw fqr::InvalidInput("predict requires --fit and --x");

    const fqr::FitResult fit = fqr::read_fit_json(o.fit_path);
    const Eigen::MatrixXd x = fqr::read_matrix_csv(o.x_path, false);
    if (x.cols() != fit.coefficients.b.rows())
      throw fqr::InvalidInput("predict: covariate count does not match the stored fit");
    const std::string dir = resolve_out(o.out, "predict-out");
    fs::create_directories(dir);

    std::vector<int> rearranged;
    const fqr::QuantileMatrix qhat = predict_rows(fit, x, &rearranged);
    fqr::write_quantile_csv((fs::path(dir) / "Qhat.csv").string(), qhat);
    Eigen::MatrixXd rearr(static_cast<Eigen::Index>(rearranged.size()), 1);
    for (Eigen::Index i = 0; i < rearr.rows(); ++i)
      rearr(i, 0) = rearranged[static_cast<std::size_t>(i)];
    fqr::write_matrix_csv((fs::path(dir) / "rearranged.csv").string(), rearr,
                          {"rearranged_positions"});

    json echo{{"fit", o.fit_path}, {"x", o.x_path}};
    write_manifest(dir, "predict", echo, {"Qhat.csv", "rearranged.csv"});
  });
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOpts {
  std::string config_path;
  std::string out;
  std::string fit_path;
  DataOpts data;
};

void add_evaluate(CLI::App& app, EvaluateOpts& o) {
  CLI::App* cmd =
      app.add_subcommand("evaluate", "residual distances of a stored fit on a dataset");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--out", o.out, "output directory (default evaluate-out)");
  cmd->add_option("--fit", o.fit_path, "fit.json produced by fit or tune");
  o.data.add_flags(cmd);

  cmd->callback([cmd, &o] {
    const json cfg = load_config_file(o.config_path);
    fill(*cmd, cfg, "--out", "out", o.out);
    fill(*cmd, cfg, "--fit", "fit", o.fit_path);
    o.data.fill_from(*cmd, cfg);
    if (o.fit_path.empty()) throw fqr::InvalidInput("evaluate requires --fit");

    const fqr::FitResult fit = fqr::read_fit_json(o.fit_path);
    const fqr::StoredDataset ds = o.data.load();
    if (ds.x.cols() != fit.coefficients.b.rows())
      throw fqr::InvalidInput("evaluate: covariate count does not match the stored fit");
    const std::string dir = resolve_out(o.out, "evaluate-out");
    fs::create_directories(dir);

    const fqr::QuantileMatrix qhat = predict_rows(fit, ds.x);
    const std::vector<double> per_obs = fqr::per_observation_rmse(ds.q, qhat);
    const fqr::RmseSummary summary = fqr::residual_rmse(ds.q, qhat);

    Eigen::MatrixXd res(static_cast<Eigen::Index>(per_obs.size()), 1);
    for (Eigen::Index i = 0; i < res.rows(); ++i) res(i, 0) = per_obs[static_cast<std::size_t>(i)];
    fqr::write_matrix_csv((fs::path(dir) / "residuals.csv").string(), res, {"w2_residual"});
    fqr::write_json((fs::path(dir) / "evaluation.json").string(),
                    json{{"n", per_obs.size()},
                         {"method", fit.method},
                         {"w2_mean", summary.mean},
                         {"w2_sd", summary.sd}});

    json echo = o.data.echo();
    echo["fit"] = o.fit_path;
    write_manifest(dir, "evaluate", echo, {"residuals.csv", "evaluation.json"});
  });
}

// ---------------------------------------------------------------------------
// benchmark
// ---------------------------------------------------------------------------

struct BenchmarkOpts {
  std::string config_path;
  std::string out;
  std::string suite = "warping";
  std::vector<int> n_list;
  std::vector<int> p_list;  // empty: p = n / 2
  int reps = 0;             // 0: suite default
  int grid_size = 100;
  std::uint64_t seed = 0;
  int threads = 1;
  // warping suite
  std::vector<int> r_list{5};
  std::string criterion = "saic";
  std::string scale_mode = "inv_sqrt_p";
  double rho = 0.9;
  int holdout = 200;
  std::vector<double> l1_fractions;
  std::vector<double> fused_fractions;
  // factor suite
  std::string rank = "2";
  double lambda = 0.01;
  double lambda_fused = 0.0;
  double noise_sd = 2.0;
  int k_factors = 2;
};

void warping_suite_rows(const BenchmarkOpts& o, json& cells, std::vector<std::string>& csv_rows);
void factor_suite_rows(const BenchmarkOpts& o, json& cells, std::vector<std::string>& csv_rows);

void add_benchmark(CLI::App& app, BenchmarkOpts& o) {
  CLI::App* cmd = app.add_subcommand("benchmark", "Monte Carlo comparison tables");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--out", o.out, "output directory (default benchmark-out)");
  cmd->add_option("--suite", o.suite, "benchmark family")
      ->check(CLI::IsMember({"warping", "factor"}));
  cmd->add_option("--n", o.n_list, "sample sizes, one table row per cell")->delimiter(',');
  cmd->add_option("--p", o.p_list, "covariate counts paired with --n (default n/2)")
      ->delimiter(',');
  cmd->add_option("--reps", o.reps, "Monte Carlo replications per cell")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--grid-size", o.grid_size, "quantile grid size")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "base seed; cells derive independent streams");
  cmd->add_option("--threads", o.threads, "worker threads across replications")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--r-true", o.r_list, "warping: true ranks, crossed with --n")->delimiter(',');
  cmd->add_option("--criterion", o.criterion, "warping: tuning criterion")
      ->check(CLI::IsMember({"saic", "sbic"}));
  cmd->add_option("--scale-mode", o.scale_mode, "warping: coefficient scale decay")
      ->check(CLI::IsMember({"inv_p", "inv_sqrt_p"}));
  cmd->add_option("--rho", o.rho, "warping: copula AR(1) parameter");
  cmd->add_option("--holdout", o.holdout, "warping: shared holdout size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--l1-fractions", o.l1_fractions, "warping: l1 ladder fractions")
      ->delimiter(',');
  cmd->add_option("--fused-fractions", o.fused_fractions, "warping: fused ladder fractions")
      ->delimiter(',');
  cmd->add_option("--rank", o.rank, "factor: rank constraint (integer or 'full')");
  cmd->add_option("--lambda", o.lambda, "factor: l1 weight on the per-observation loss scale")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--lambda-fused", o.lambda_fused, "factor: fused weight")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--noise-sd", o.noise_sd, "factor: pre-rearrangement cell noise")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--k-factors", o.k_factors, "factor: latent factor count")
      ->check(CLI::PositiveNumber);

  cmd->callback([cmd, &o] {
    const json cfg = load_config_file(o.config_path);
    fill(*cmd, cfg, "--out", "out", o.out);
    fill(*cmd, cfg, "--suite", "suite", o.suite);
    fill(*cmd, cfg, "--n", "n", o.n_list);
    fill(*cmd, cfg, "--p", "p", o.p_list);
    fill(*cmd, cfg, "--reps", "reps", o.reps);
    fill(*cmd, cfg, "--grid-size", "grid_size", o.grid_size);
    fill(*cmd, cfg, "--seed", "seed", o.seed);
    fill(*cmd, cfg, "--threads", "threads", o.threads);
    fill(*cmd, cfg, "--r-true", "r_true", o.r_list);
    fill(*cmd, cfg, "--criterion", "criterion", o.criterion);
    fill(*cmd, cfg, "--scale-mode", "scale_mode", o.scale_mode);
    fill(*cmd, cfg, "--rho", "rho", o.rho);
    fill(*cmd, cfg, "--holdout", "holdout", o.holdout);
    fill(*cmd, cfg, "--l1-fractions", "l1_fractions", o.l1_fractions);
    fill(*cmd, cfg, "--fused-fractions", "fused_fractions", o.fused_fractions);
    fill(*cmd, cfg, "--rank", "rank", o.rank);
    fill(*cmd, cfg, "--lambda", "lambda", o.lambda);
    fill(*cmd, cfg, "--lambda-fused", "lambda_fused", o.lambda_fused);
    fill(*cmd, cfg, "--noise-sd", "noise_sd", o.noise_sd);
    fill(*cmd, cfg, "--k-factors", "k_factors", o.k_factors);

    if (o.n_list.empty()) o.n_list = {o.suite == "warping" ? 50 : 100};
    if (!o.p_list.empty() && o.p_list.size() != o.n_list.size())
      throw fqr::InvalidInput("--p must pair one-to-one with --n");
    if (o.reps == 0) o.reps = o.suite == "warping" ? 50 : 20;

    const std::string dir = resolve_out(o.out, "benchmark-out");
    fs::create_directories(dir);

    json cells = json::array();
    std::vector<std::string> csv_rows;
    if (o.suite == "warping")
      warping_suite_rows(o, cells, csv_rows);
    else
      factor_suite_rows(o, cells, csv_rows);

    std::ofstream csv((fs::path(dir) / "benchmark.csv").string());
    if (!csv) throw fqr::InvalidInput("cannot write " + dir + "/benchmark.csv");
    for (const std::string& row : csv_rows) csv << row << '\n';

    json echo{{"suite", o.suite},       {"n", o.n_list},
              {"p", o.p_list},        {"reps", o.reps},
              {"grid_size", o.grid_size}, {"seed", o.seed},
              {"threads", o.threads}};
    if (o.suite == "warping") {
      echo["r_true"] = o.r_list;
      echo["criterion"] = o.criterion;
      echo["scale_mode"] = o.scale_mode;
      echo["rho"] = o.rho;
      echo["holdout"] = o.holdout;
      if (!o.l1_fractions.empty()) echo["l1_fractions"] = o.l1_fractions;
      if (!o.fused_fractions.empty()) echo["fused_fractions"] = o.fused_fractions;
    } else {
      echo["rank"] = o.rank;
      echo["lambda"] = o.lambda;
      echo["lambda_fused"] = o.lambda_fused;
      echo["noise_sd"] = o.noise_sd;
      echo["k_factors"] = o.k_factors;
    }
    fqr::write_json((fs::path(dir) / "benchmark.json").string(),
                    json{{"version", fqr::kVersion}, {"config", echo}, {"cells", cells}});
    write_manifest(dir, "benchmark", echo, {"benchmark.csv", "benchmark.json"});
  });
}

std::string join_csv(const std::vector<std::string>& fields) {
  std::string row;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) row += ',';
    row += fields[i];
  }
  return row;
}

json summary_to_json(const fqr::MonteCarloSummary& s) {
  return json{{"b_reps", s.b_reps}, {"sqrt_mse", s.rmse}, {"bias", s.bias},
              {"bias_sq", s.bias_sq}, {"sqrt_var", s.sd}, {"pe_in", s.pe_in},
              {"pe_out", s.pe_out},   {"per_rep", s.per_rep}};
}

void warping_suite_rows(const BenchmarkOpts& o, json& cells, std::vector<std::string>& csv_rows) {
  using fqr::format_double;
  csv_rows.push_back(
      "design,r_true,n,p,b_reps,criterion,scale_mode,"
      "lrk_sqrt_mse,lrk_bias,lrk_sqrt_var,lrk_pe_in,lrk_pe_out,"
      "ols_sqrt_mse,ols_bias,ols_sqrt_var,ols_pe_in,ols_pe_out,failed_reps");
  int cell_idx = 0;
  for (int r : o.r_list) {
    for (std::size_t k = 0; k < o.n_list.size(); ++k, ++cell_idx) {
      const int n = o.n_list[k];
      const int p = o.p_list.empty() ? std::max(1, n / 2) : o.p_list[k];
      fqr::WarpingBenchConfig bc;
      bc.r_true = r;
      bc.n = n;
      bc.p = p;
      bc.b_reps = o.reps;
      bc.m_grid = o.grid_size;
      bc.rho = o.rho;
      bc.scale_mode = parse_scale_mode(o.scale_mode);
      bc.holdout_n = o.holdout;
      bc.criterion = parse_criterion(o.criterion);
      if (!o.l1_fractions.empty()) bc.l1_fractions = o.l1_fractions;
      if (!o.fused_fractions.empty()) bc.fused_fractions = o.fused_fractions;
      bc.seed = fqr::mix_seed(o.seed, 100 + static_cast<std::uint64_t>(cell_idx));
      bc.threads = o.threads;

      json cell{{"design", "warping"}, {"r_true", r}, {"n", n}, {"p", p}, {"b_reps", o.reps}};
      std::vector<std::string> fields{"warping",    std::to_string(r), std::to_string(n),
                                      std::to_string(p), std::to_string(o.reps), o.criterion,
                                      o.scale_mode};
      try {
        const fqr::WarpingCellResult res = fqr::run_warping_cell(bc);
        for (const fqr::MonteCarloSummary* s : {&res.lrk, &res.ols})
          for (double v : {s->rmse, s->bias, s->sd, s->pe_in, s->pe_out})
            fields.push_back(format_double(v));
        fields.push_back(std::to_string(res.failed_reps));
        cell["lrk"] = summary_to_json(res.lrk);
        cell["ols"] = summary_to_json(res.ols);
        cell["lambda_max"] = res.lambda_max;
        cell["fused_max"] = res.fused_max;
        cell["selected_cells"] = res.selected_cells;
        cell["failed_reps"] = res.failed_reps;
      } catch (const std::exception& e) {
        // A failed cell keeps its table row (empty metrics) and the run goes on.
        for (int i = 0; i < 10; ++i) fields.push_back("nan");
        fields.push_back(std::to_string(o.reps));
        cell["error"] = e.what();
      }
      csv_rows.push_back(join_csv(fields));
      cells.push_back(std::move(cell));
    }
  }
}

void factor_suite_rows(const BenchmarkOpts& o, json& cells, std::vector<std::string>& csv_rows) {
  using fqr::format_double;
  csv_rows.push_back(
      "design,n,p,b_reps,rank,lambda,lambda_fused,noise_sd,"
      "prop_train_mean,prop_train_sd,prop_test_mean,prop_test_sd,"
      "ord_train_mean,ord_train_sd,ord_test_mean,ord_test_sd,"
      "ord_pseudoinverse,prop_converged,failed_reps");
  for (std::size_t k = 0; k < o.n_list.size(); ++k) {
    const int n = o.n_list[k];
    const int p = o.p_list.empty() ? std::max(1, n / 2) : o.p_list[k];
    fqr::FactorBenchConfig bc;
    bc.n = n;
    bc.p = p;
    bc.m_quantiles = o.grid_size;
    bc.k_factors = o.k_factors;
    bc.noise_sd = o.noise_sd;
    bc.rank = parse_rank(o.rank, p, o.grid_size);
    bc.lambda = o.lambda;
    bc.lambda_fused = o.lambda_fused;
    bc.b_reps = o.reps;
    bc.seed = fqr::mix_seed(o.seed, 100 + static_cast<std::uint64_t>(k));
    bc.threads = o.threads;

    json cell{{"design", "factor"}, {"n", n}, {"p", p}, {"b_reps", o.reps},
              {"rank", bc.rank},    {"lambda", o.lambda}, {"lambda_fused", o.lambda_fused},
              {"noise_sd", o.noise_sd}};
    std::vector<std::string> fields{"factor",
                                    std::to_string(n),
                                    std::to_string(p),
                                    std::to_string(o.reps),
                                    std::to_string(bc.rank),
                                    format_double(o.lambda),
                                    format_double(o.lambda_fused),
                                    format_double(o.noise_sd)};
    try {
      const fqr::FactorCellResult res = fqr::run_factor_cell(bc);
      for (const fqr::RmseSummary* s :
           {&res.proposed.train, &res.proposed.test, &res.ordinary.train, &res.ordinary.test}) {
        fields.push_back(format_double(s->mean));
        fields.push_back(format_double(s->sd));
      }
      fields.push_back(res.ordinary.pseudoinverse_used ? "1" : "0");
      fields.push_back(res.proposed.all_converged ? "1" : "0");
      fields.push_back(std::to_string(res.failed_reps));
      cell["proposed"] = json{{"train_mean", res.proposed.train.mean},
                              {"train_sd", res.proposed.train.sd},
                              {"test_mean", res.proposed.test.mean},
                              {"test_sd", res.proposed.test.sd},
                              {"all_converged", res.proposed.all_converged},
                              {"pseudoinverse_used", res.proposed.pseudoinverse_used}};
      cell["ordinary"] = json{{"train_mean", res.ordinary.train.mean},
                              {"train_sd", res.ordinary.train.sd},
                              {"test_mean", res.ordinary.test.mean},
                              {"test_sd", res.ordinary.test.sd},
                              {"all_converged", res.ordinary.all_converged},
                              {"pseudoinverse_used", res.ordinary.pseudoinverse_used}};
      cell["failed_reps"] = res.failed_reps;
    } catch (const std::exception& e) {
      for (int i = 0; i < 8; ++i) fields.push_back("nan");
      fields.push_back("0");
      fields.push_back("0");
      fields.push_back(std::to_string(o.reps));
      cell["error"] = e.what();
    }
    csv_rows.push_back(join_csv(fields));
    cells.push_back(std::move(cell));
  }
}

// ---------------------------------------------------------------------------
// plotdata
// ---------------------------------------------------------------------------

struct PlotdataOpts {
  std::string config_path;
  std::string out;
  DataOpts data;
  SolverOpts solver;  // used by the residual panel's low-rank fit
  bool solver_rank_given = false;
};

void add_plotdata(CLI::App& app, PlotdataOpts& o) {
  CLI::App* cmd = app.add_subcommand(
      "plotdata", "long-format CSV of the illustration panels for a simulated run");
  cmd->add_option("--config", o.config_path, "JSON config file; flags override its keys");
  cmd->add_option("--out", o.out, "output directory (default plotdata-out)");
  o.data.add_flags(cmd);
  o.solver.add_flags(cmd);

  cmd->callback([cmd, &o] {
    const json cfg = load_config_file(o.config_path);
    fill(*cmd, cfg, "--out", "out", o.out);
    o.data.fill_from(*cmd, cfg);
    o.solver.fill_from(*cmd, cfg);
    o.solver_rank_given = cmd->get_option("--rank")->count() > 0 || cfg.contains("rank");

    const fqr::StoredDataset ds = o.data.load();
    if (!ds.true_b.has_value() || !ds.true_intercept.has_value() ||
        !ds.meta.contains("true_center"))
      throw fqr::InvalidInput(
          "plotdata needs a completed simulate directory (trueB.csv and meta.json)");
    const Eigen::MatrixXd& true_b = ds.true_b->b;
    const Eigen::VectorXd& intercept = *ds.true_intercept;
    const double center = ds.meta.at("true_center").get<double>();
    const std::vector<double>& upts = ds.q.grid.points();
    const int n = ds.q.n();
    const int m = ds.q.m();
    const int p = static_cast<int>(true_b.rows());

    // Truth panels share the latent conditional rows recomputed from the
    // stored coefficients.
    Eigen::MatrixXd latent = (ds.x.array() - center).matrix() * true_b;
    latent.rowwise() += intercept.transpose();

    // Residual panel: both estimators refitted on the stored dataset. The
    // rank constraint defaults to the generating rank recorded in meta.json.
    const fqr::DesignMatrix x(ds.x);
    if (!o.solver_rank_given && ds.meta.contains("config")) {
      const json& mc = ds.meta.at("config");
      if (mc.contains("r_true"))
        o.solver.rank = std::to_string(mc.at("r_true").get<int>());
      else if (mc.contains("k_factors"))
        o.solver.rank = std::to_string(mc.at("k_factors").get<int>());
    }
    const fqr::FitResult ols = fqr::fit_ols(x, ds.q);
    const fqr::FitResult lrk = fqr::fit_lowrank(x, ds.q, o.solver.to_solver(p, m));
    const std::vector<double> res_ols = fqr::per_observation_rmse(ds.q, predict_rows(ols, ds.x));
    const std::vector<double> res_lrk = fqr::per_observation_rmse(ds.q, predict_rows(lrk, ds.x));

    const std::string dir = resolve_out(o.out, "plotdata-out");
    fs::create_directories(dir);
    std::ofstream f((fs::path(dir) / "plotdata.csv").string());
    if (!f) throw fqr::InvalidInput("cannot write " + dir + "/plotdata.csv");
    f << "panel,series,u,value\n";
    auto emit = [&f](const char* panel, const std::string& series, double u, double v) {
      f << panel << ',' << series << ',' << fqr::format_double(u) << ','
        << fqr::format_double(v) << '\n';
    };
    for (int j = 0; j < p; ++j)
      for (int k = 0; k < m; ++k)
        emit("coefficient", "beta_" + std::to_string(j + 1), upts[k], true_b(j, k));
    for (int i = 0; i < n; ++i) {
      const std::string series = "obs_" + std::to_string(i + 1);
      for (int k = 0; k < m; ++k) emit("latent_quantile", series, upts[k], latent(i, k));
      for (int k = 0; k < m; ++k) emit("response_quantile", series, upts[k], ds.q.values(i, k));
      // Density via finite differences of the quantile function: at the
      // midpoint between adjacent quantile levels, density = du / dq. Flat
      // stretches (point masses) are skipped.
      for (int k = 0; k + 1 < m; ++k) {
        const double dq = ds.q.values(i, k + 1) - ds.q.values(i, k);
        if (dq <= 1e-12) continue;
        const double s = 0.5 * (ds.q.values(i, k) + ds.q.values(i, k + 1));
        emit("response_density", series, s, (upts[k + 1] - upts[k]) / dq);
      }
      for (int k = 0; k < m; ++k)
        emit("pseudo_error", series, upts[k], ds.q.values(i, k) - latent(i, k));
    }
    for (int i = 0; i < n; ++i) {
      emit("residual_wasserstein", "lrk", i + 1, res_lrk[static_cast<std::size_t>(i)]);
      emit("residual_wasserstein", "ols", i + 1, res_ols[static_cast<std::size_t>(i)]);
    }
    f.close();

    json echo = o.data.echo();
    echo.update(o.solver.echo());
    write_manifest(dir, "plotdata", echo, {"plotdata.csv"});
  });
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

void print_error(const std::string& type, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"message", message}}}}.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-rank penalized quantile-function regression"};
  app.set_version_flag("--version", fqr::kVersion);
  app.require_subcommand(1);

  SimulateOpts simulate_opts;
  FitOpts fit_opts;
  TuneOpts tune_opts;
  PredictOpts predict_opts;
  EvaluateOpts evaluate_opts;
  BenchmarkOpts benchmark_opts;
  PlotdataOpts plotdata_opts;
  add_simulate(app, simulate_opts);
  add_fit(app, fit_opts);
  add_tune(app, tune_opts);
  add_predict(app, predict_opts);
  add_evaluate(app, evaluate_opts);
  add_benchmark(app, benchmark_opts);
  add_plotdata(app, plotdata_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return 1;
  } catch (const fqr::InvalidInput& e) {
    print_error("InvalidInput", e.what());
    return 2;
  } catch (const fqr::GridMismatch& e) {
    print_error("GridMismatch", e.what());
    return 2;
  } catch (const fqr::SolverDiverged& e) {
    print_error("SolverDiverged", e.what());
    return 3;
  } catch (const fqr::NumericalError& e) {
    print_error("NumericalError", e.what());
    return 3;
  } catch (const fqr::TuningFailed& e) {
    print_error("TuningFailed", e.what());
    return 3;
  } catch (const fqr::GenerationError& e) {
    print_error("GenerationError", e.what());
    return 3;
  } catch (const std::exception& e) {
    print_error("Error", e.what());
    return 2;
  }
  return 0;
}
