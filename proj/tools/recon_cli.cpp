// recon: reconcile tabular forecasts against their aggregation constraints.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "recon/recon.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNotConverged = 3;

void add_solver_flags(CLI::App* cmd, recon::SettingsOverrides& o, bool with_kind) {
  if (with_kind) cmd->add_option("--solver", o.solver, "lsqr, ap, dykstra or admm");
  cmd->add_option("--eps-iter", o.eps_iter, "AP/Dykstra step-size tolerance (absolute)");
  cmd->add_option("--eps-fea", o.eps_fea, "AP/Dykstra ||(y)_-|| tolerance (absolute)");
  cmd->add_option("--eps-abs", o.eps_abs, "ADMM absolute tolerance");
  cmd->add_option("--eps-rel", o.eps_rel, "ADMM relative tolerance");
  cmd->add_option("--rho", o.rho, "ADMM penalty parameter");
  cmd->add_option("--max-iters", o.max_iters, "iteration cap");
}

int cmd_reconcile(const std::string& config_path, const recon::SettingsOverrides& overrides,
                  const std::optional<std::string>& output_dir, bool tune_rho) {
  auto config = recon::load_config(config_path);
  recon::apply_overrides(config, overrides);
  if (output_dir) config.output_dir = *output_dir;

  if (tune_rho) {
    const auto trials = recon::run_tune_rho(config, std::cerr);
    std::cout << "rho         iterations  converged  time[s]\n";
    const recon::RhoTrial* best = nullptr;
    for (const auto& t : trials) {
      char line[96];
      std::snprintf(line, sizeof line, "%-10.0e  %10ld  %9s  %7.3f\n", t.rho,
                    static_cast<long>(t.iterations), t.converged ? "yes" : "no", t.wall_time);
      std::cout << line;
      if (t.converged && (!best || t.iterations < best->iterations)) best = &t;
    }
    if (!best) {
      std::cout << "no rho on the grid converged within max_iters\n";
      return kExitNotConverged;
    }
    std::cout << "fewest iterations at rho = " << best->rho << '\n';
    return 0;
  }

  const auto outcome = recon::run_reconcile(config, std::cerr);
  recon::write_diagnostics_text(std::cout, outcome.diagnostics);
  std::cout << "\nwall time " << outcome.diagnostics.wall_time << " s\n";
  for (const auto& f : outcome.written) std::cout << "wrote " << f << '\n';
  if (!outcome.diagnostics.converged) {
    std::cerr << "error: solver " << recon::to_string(outcome.diagnostics.solver)
              << " did not converge within " << config.settings.max_iters << " iterations\n";
    return kExitNotConverged;
  }
  return 0;
}

int cmd_validate(const std::string& config_path, bool strict_flag) {
  const auto config = recon::load_config(config_path);
  const bool strict = strict_flag || config.build.strict;
  const auto violations = recon::run_validate(config);
  int errors = 0, warnings = 0;
  for (const auto& v : violations) {
    const bool is_error = v.severity == recon::Violation::Severity::error;
    (is_error ? errors : warnings)++;
    std::cout << (is_error ? "error: " : "warning: ") << v.message << '\n';
  }
  std::cout << errors << " error(s), " << warnings << " warning(s)\n";
  return (errors > 0 || (strict && warnings > 0)) ? kExitError : 0;
}

int cmd_gen(const recon::GenParams& params, const std::string& out_dir) {
  const auto fixture = recon::generate_fixture(params);
  for (const auto& f : recon::write_fixture(fixture, out_dir)) std::cout << "wrote " << f << '\n';
  return 0;
}

int cmd_bench(recon::BenchOptions options, const recon::SettingsOverrides& o,
              const std::vector<std::string>& solver_names, const std::string& csv_path,
              bool no_timing) {
  auto& st = options.settings;
  if (o.eps_iter) {
    st.eps_iter = *o.eps_iter;
    options.eps_iter_set = true;
  }
  if (o.eps_fea) {
    st.eps_fea = *o.eps_fea;
    options.eps_fea_set = true;
  }
  if (o.eps_abs) st.eps_abs = *o.eps_abs;
  if (o.eps_rel) st.eps_rel = *o.eps_rel;
  if (o.rho) {
    st.rho = *o.rho;
    options.rho_set = true;
  }
  if (o.max_iters) st.max_iters = *o.max_iters;
  st.validate();
  if (!solver_names.empty()) {
    options.solvers.clear();
    for (const auto& name : solver_names) options.solvers.push_back(recon::parse_solver_kind(name));
  }
  options.memory_budget_mb = recon::memory_budget_mb(options.memory_budget_mb);

  const auto rows = recon::run_bench(options, std::cerr);
  recon::write_bench_table(std::cout, rows);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw recon::Error("cannot open '" + csv_path + "' for writing");
    recon::write_bench_csv(out, rows, !no_timing);
    std::cout << "wrote " << csv_path << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Forecast reconciliation under aggregation and nonnegativity constraints"};
  app.require_subcommand(1);

  recon::SettingsOverrides overrides;
  std::string config_path;
  std::optional<std::string> output_dir;
  bool tune_rho = false;
  auto* reconcile = app.add_subcommand("reconcile", "solve a configured run and write outputs");
  reconcile->add_option("config", config_path, "JSON run configuration")->required();
  add_solver_flags(reconcile, overrides, true);
  reconcile->add_option("--matrix-out", overrides.matrix_out, "write A in Matrix Market format");
  reconcile->add_option("--output-dir", output_dir, "override the configured output directory");
  reconcile->add_flag("--tune-rho", tune_rho, "sweep ADMM rho over 1e-4..1e4 and report iterations");

  bool strict = false;
  auto* validate = app.add_subcommand("validate", "check inputs and derived constraints without solving");
  validate->add_option("config", config_path, "JSON run configuration")->required();
  validate->add_flag("--strict", strict, "treat warnings as failures");

  recon::GenParams gen_params;
  std::string gen_out = "fixture";
  auto* gen = app.add_subcommand("gen", "write a synthetic tabular fixture with ground truth");
  gen->add_option("--levels", gen_params.levels, "tree levels including the root")
      ->check(CLI::Range(2, 12));
  gen->add_option("--branching", gen_params.branching, "children per node")->check(CLI::PositiveNumber);
  gen->add_option("--noise", gen_params.noise, "multiplicative noise amplitude")
      ->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_params.seed, "random seed");
  gen->add_option("--out", gen_out, "output directory");

  recon::BenchOptions bench_options;
  std::vector<std::string> solver_names;
  std::string bench_csv;
  bool no_timing = false;
  recon::SettingsOverrides bench_overrides;
  auto* bench = app.add_subcommand("bench", "time every solver on synthetic grid instances");
  bench->add_option("--sizes", bench_options.sizes, "approximate item counts")
      ->delimiter(',')
      ->required();
  bench->add_option("--seed", bench_options.seed, "random seed");
  bench->add_option("--noise", bench_options.noise, "multiplicative noise amplitude in [0, 1)");
  bench->add_option("--solvers", solver_names, "subset of lsqr,ap,dykstra,admm")->delimiter(',');
  bench->add_option("--relative-eps", bench_options.relative_eps,
                    "default eps_iter/eps_fea as a multiple of max |forecast|");
  bench->add_option("--memory-budget-mb", bench_options.memory_budget_mb,
                    "refuse sizes above this estimate (RECON_MEMORY_BUDGET_MB overrides)");
  bench->add_option("--csv", bench_csv, "also write the table as CSV");
  bench->add_flag("--no-timing", no_timing, "leave wall times out of the CSV");
  add_solver_flags(bench, bench_overrides, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  try {
    if (*reconcile) return cmd_reconcile(config_path, overrides, output_dir, tune_rho);
    if (*validate) return cmd_validate(config_path, strict);
    if (*gen) return cmd_gen(gen_params, gen_out);
    if (*bench) return cmd_bench(bench_options, bench_overrides, solver_names, bench_csv, no_timing);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
