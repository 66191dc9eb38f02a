#pragma once

// End-to-end runs behind the command-line tool: configuration loading,
// reconciliation of tabular datasets, validation, fixture generation and
// the solver benchmark.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "recon/constraint_builder.hpp"
#include "recon/solvers.hpp"
#include "recon/synthetic.hpp"
#include "recon/weighting.hpp"

namespace recon {

struct DatasetSpec {
  std::string name;
  std::string path;  // resolved against the config file's directory
  std::vector<std::string> dimensions;
  std::string metric;
  double importance = 1.0;
  /// Optional column holding actual values, used for MAPE against actuals.
  std::string actuals;
};

struct RunConfig {
  std::vector<DatasetSpec> datasets;
  ScaleMode scale_mode = ScaleMode::reciprocal;
  double epsilon = 1.0;
  BuildOptions build;
  SolverKind solver = SolverKind::dykstra;
  SolveSettings<double> settings;
  /// eps_iter and eps_fea are absolute and scale-dependent, so projection
  /// solvers refuse to run unless they were given explicitly.
  bool eps_iter_set = false;
  bool eps_fea_set = false;
  std::string output_dir;
  std::string matrix_out;  // empty: no Matrix Market export
};

/// JSON document; relative paths resolve against `base_dir`. Unknown keys
/// are errors.
RunConfig parse_config(const std::string& text, const std::string& base_dir,
                       const std::string& source = "<config>");
RunConfig load_config(const std::string& path);

/// Command-line overrides of the solver settings.
struct SettingsOverrides {
  std::optional<std::string> solver;
  std::optional<double> eps_iter;
  std::optional<double> eps_fea;
  std::optional<double> eps_abs;
  std::optional<double> eps_rel;
  std::optional<double> rho;
  std::optional<long> max_iters;
  std::optional<std::string> matrix_out;
};

void apply_overrides(RunConfig& config, const SettingsOverrides& overrides);

/// Per-dataset accuracy. MAPE values are percentages over entries whose
/// reference value is nonzero.
struct SegmentDiagnostics {
  std::string name;
  Index rows = 0;
  double mape_vs_input = 0.0;
  std::optional<double> input_mape_vs_actuals;
  std::optional<double> reconciled_mape_vs_actuals;
};

struct Diagnostics {
  std::vector<SegmentDiagnostics> segments;
  double relative_change = 0.0;  // ||y* - yhat|| / ||y*||
  double negative_norm = 0.0;    // ||(y*)_-||
  double constraint_norm = 0.0;  // ||A y*||
  double objective = 0.0;
  double wall_time = 0.0;
  Index iterations = 0;
  Index items = 0;
  Index constraints = 0;
  bool converged = false;
  SolverKind solver = SolverKind::lsqr;
};

/// Mean of |x_i - ref_i| / |ref_i| * 100 over ref_i != 0; zero when no entry counts.
double mape(const Eigen::Ref<const Vector<double>>& x, const Eigen::Ref<const Vector<double>>& ref);

/// ||y - yhat|| / ||y||, zero when both vanish.
double relative_change(const Eigen::Ref<const Vector<double>>& y,
                       const Eigen::Ref<const Vector<double>>& yhat);

void write_diagnostics_text(std::ostream& out, const Diagnostics& d);
void write_diagnostics_csv(std::ostream& out, const Diagnostics& d);

struct ReconcileOutcome {
  ConstraintBuildResult build;
  SolveReport<double> report;
  Diagnostics diagnostics;
  std::vector<std::string> written;  // output files, in write order
};

/// Loads, builds, weights and solves. When `write_outputs` is set, writes
/// into `config.output_dir`:
///   <dataset>_reconciled.csv  input rows plus a `reconciled` column
///   reconciled.csv            stacked labels, forecast and reconciled value
///   diagnostics.txt/.csv      accuracy and feasibility report
///   timing.txt                wall time and iteration count
/// and the Matrix Market export when one is configured. Build warnings go to `log`.
ReconcileOutcome run_reconcile(const RunConfig& config, std::ostream& log,
                               bool write_outputs = true);

/// Configuration, ingestion and constraint-derivation problems without
/// solving. Never throws for data problems; they become violations.
std::vector<Violation> run_validate(const RunConfig& config);

struct RhoTrial {
  double rho = 0.0;
  Index iterations = 0;
  bool converged = false;
  double wall_time = 0.0;
};

/// ADMM over rho in {1e-4, 1e-3, ..., 1e4}.
std::vector<RhoTrial> run_tune_rho(const RunConfig& config, std::ostream& log);

/// Writes level<d>.csv (dimension columns, `forecast`, `actual`),
/// hierarchy.tsv and a ready-to-run config.json into `dir`.
std::vector<std::string> write_fixture(const GeneratedFixture& fixture, const std::string& dir);

struct BenchOptions {
  std::vector<Index> sizes;
  std::uint64_t seed = 0;
  double noise = 0.3;
  std::vector<SolverKind> solvers{SolverKind::lsqr, SolverKind::alternating_projection,
                                  SolverKind::dykstra, SolverKind::admm};
  SolveSettings<double> settings;
  /// Unset tolerances default to this multiple of ||yhat||_inf.
  bool eps_iter_set = false;
  bool eps_fea_set = false;
  double relative_eps = 1e-4;
  /// Unset rho defaults to the mean weight, which keeps ADMM's step scale
  /// matched to the objective (reciprocal weights on large forecasts are tiny).
  bool rho_set = false;
  double memory_budget_mb = 4096.0;
};

struct BenchRow {
  Index items = 0;
  Index constraints = 0;
  SolverKind solver = SolverKind::lsqr;
  double wall_time = 0.0;
  double relative_change = 0.0;
  double negative_norm = 0.0;
  double constraint_norm = 0.0;
  Index iterations = 0;
  bool converged = false;
};

/// Rough peak footprint of one benchmark solve, in bytes.
double estimate_bench_bytes(const GridParams& params);

/// Memory budget from RECON_MEMORY_BUDGET_MB when set, else `fallback_mb`.
double memory_budget_mb(double fallback_mb);

/// One row per (size, solver). Throws InvalidInput for a size whose
/// estimated footprint exceeds the memory budget.
std::vector<BenchRow> run_bench(const BenchOptions& options, std::ostream& log);

/// `with_timing = false` leaves out the wall-time column.
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool with_timing = true);
void write_bench_table(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace recon
