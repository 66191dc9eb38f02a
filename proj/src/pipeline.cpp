#include "recon/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "recon/csv.hpp"
#include "recon/matrix_market.hpp"

namespace recon {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* k) { return item.key() == k; })) {
      throw ParseError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

const json& require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  return j;
}

template <typename T>
T get_as(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + ": value has the wrong type");
  }
}

ScaleMode parse_scale_mode(const std::string& name, const std::string& where) {
  if (name == "none") return ScaleMode::none;
  if (name == "reciprocal") return ScaleMode::reciprocal;
  if (name == "reciprocal_squared") return ScaleMode::reciprocal_squared;
  throw ParseError(where + ": unknown scale mode '" + name +
                   "' (expected none, reciprocal or reciprocal_squared)");
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || fs::path(path).is_absolute() || base.empty()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6e", v);
  return buf;
}

std::string fixed_time(double seconds) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", seconds);
  return buf;
}

// Everything the solvers need, plus what the writers need to echo the inputs.
struct LoadedProblem {
  std::vector<CsvTable> tables;
  std::vector<TabularDataset> datasets;
  ConstraintBuildResult build;
  DiagonalWeights<double> weights;
  Vector<double> actuals;             // NaN where a dataset has no actuals column
  std::vector<char> has_actuals;      // per dataset
};

std::vector<double> read_actuals(const CsvTable& table, const DatasetSpec& spec) {
  const long col = table.column(spec.actuals);
  if (col < 0) throw ParseError(spec.path + ": actuals column '" + spec.actuals + "' not found");
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    double v = 0.0;
    const auto& text = table.rows[r][static_cast<std::size_t>(col)];
    if (!parse_number(text, v)) {
      throw ParseError(spec.path + ":" + std::to_string(table.lines[r]) + ": actual '" + text +
                       "' is not numeric");
    }
    out.push_back(v);
  }
  return out;
}

LoadedProblem load_problem(const RunConfig& config, std::ostream& log) {
  if (config.datasets.size() < 2) {
    throw InvalidInput("configuration needs at least two datasets");
  }
  LoadedProblem p;
  for (const auto& spec : config.datasets) {
    p.tables.push_back(read_csv(spec.path));
    p.datasets.push_back(
        dataset_from_csv(p.tables.back(), spec.name, spec.dimensions, spec.metric, spec.path));
  }
  p.build = build_constraints_multi(p.datasets, config.build);
  for (const auto& w : p.build.warnings) log << "warning: " << w << '\n';
  for (const auto& n : p.build.notes) log << "note: " << n << '\n';

  const Index n = p.build.forecast.size();
  Vector<double> importance(n);
  p.actuals = Vector<double>::Constant(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t d = 0; d < config.datasets.size(); ++d) {
    const auto& spec = config.datasets[d];
    const Index offset = p.build.offsets[d];
    const auto rows = static_cast<Index>(p.datasets[d].rows.size());
    importance.segment(offset, rows).setConstant(spec.importance);
    p.has_actuals.push_back(spec.actuals.empty() ? 0 : 1);
    if (!spec.actuals.empty()) {
      const auto values = read_actuals(p.tables[d], spec);
      for (Index r = 0; r < rows; ++r) p.actuals[offset + r] = values[static_cast<std::size_t>(r)];
    }
  }
  WeightSpec<double> ws;
  ws.importance = std::move(importance);
  ws.scale_mode = config.scale_mode;
  ws.epsilon = config.epsilon;
  p.weights = build_weights(ws, p.build.forecast.values);
  return p;
}

void require_projection_tolerances(const RunConfig& config) {
  const bool projection = config.solver == SolverKind::alternating_projection ||
                          config.solver == SolverKind::dykstra;
  if (projection && !(config.eps_iter_set && config.eps_fea_set)) {
    throw InvalidInput("solver '" + std::string(to_string(config.solver)) +
                       "' needs eps_iter and eps_fea (config solver section or --eps-iter / "
                       "--eps-fea); both are absolute, start near 1e-8 * max |forecast|");
  }
}

SolveReport<double> solve_problem(const LoadedProblem& p,
                                  SolverKind kind, const SolveSettings<double>& settings) {
  const auto& yhat = p.build.forecast.values;
  if (p.build.a.rows() == 0) {
    // Nothing couples the entries; nonnegative inputs are already optimal.
    SolveReport<double> r;
    r.solver = kind;
    r.y = ForecastVector<double>(Vector<double>(yhat.cwiseMax(0.0)));
    r.objective = quadratic_objective<double>(r.y.values, yhat, p.weights);
    r.converged = true;
    return r;
  }
  return reconcile<double>(kind, p.build.a, p.weights, yhat, settings);
}

Diagnostics diagnose(const LoadedProblem& p, const SolveReport<double>& report,
                     const RunConfig& config) {
  Diagnostics d;
  const auto& y = report.y.values;
  const auto& yhat = p.build.forecast.values;
  for (std::size_t i = 0; i < p.datasets.size(); ++i) {
    SegmentDiagnostics s;
    s.name = config.datasets[i].name;
    s.rows = static_cast<Index>(p.datasets[i].rows.size());
    const Index off = p.build.offsets[i];
    s.mape_vs_input = mape(y.segment(off, s.rows), yhat.segment(off, s.rows));
    if (p.has_actuals[i]) {
      s.input_mape_vs_actuals = mape(yhat.segment(off, s.rows), p.actuals.segment(off, s.rows));
      s.reconciled_mape_vs_actuals = mape(y.segment(off, s.rows), p.actuals.segment(off, s.rows));
    }
    d.segments.push_back(std::move(s));
  }
  d.relative_change = relative_change(y, yhat);
  d.negative_norm = y.cwiseMin(0.0).norm();
  d.constraint_norm = p.build.a.rows() ? matvec(p.build.a, y).norm() : 0.0;
  d.objective = report.objective;
  d.wall_time = report.wall_time;
  d.iterations = report.iterations;
  d.items = yhat.size();
  d.constraints = p.build.a.rows();
  d.converged = report.converged;
  d.solver = report.solver;
  return d;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

std::vector<std::string> write_outputs(const RunConfig& config, const LoadedProblem& p,
                                       const SolveReport<double>& report, const Diagnostics& d) {
  std::vector<std::string> written;
  const fs::path dir(config.output_dir);
  fs::create_directories(dir);
  const auto& y = report.y.values;

  for (std::size_t i = 0; i < p.datasets.size(); ++i) {
    const auto& table = p.tables[i];
    if (table.column("reconciled") >= 0) {
      throw InvalidInput(config.datasets[i].path + ": input already has a 'reconciled' column");
    }
    const fs::path path = dir / (config.datasets[i].name + "_reconciled.csv");
    auto out = open_output(path);
    auto header = table.header;
    header.push_back("reconciled");
    write_csv_row(out, header);
    const Index off = p.build.offsets[i];
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      auto fields = table.rows[r];
      fields.push_back(format_number(y[off + static_cast<Index>(r)]));
      write_csv_row(out, fields);
    }
    close_output(out, path);
    written.push_back(path.string());
  }

  {
    const fs::path path = dir / "reconciled.csv";
    auto out = open_output(path);
    write_csv_row(out, {"dataset", "key", "forecast", "reconciled"});
    for (Index k = 0; k < y.size(); ++k) {
      const auto& label = p.build.forecast.labels[static_cast<std::size_t>(k)];
      write_csv_row(out, {label.dataset, label.key, format_number(p.build.forecast.values[k]),
                          format_number(y[k])});
    }
    close_output(out, path);
    written.push_back(path.string());
  }
  {
    const fs::path path = dir / "diagnostics.txt";
    auto out = open_output(path);
    write_diagnostics_text(out, d);
    close_output(out, path);
    written.push_back(path.string());
  }
  {
    const fs::path path = dir / "diagnostics.csv";
    auto out = open_output(path);
    write_diagnostics_csv(out, d);
    close_output(out, path);
    written.push_back(path.string());
  }
  {
    const fs::path path = dir / "timing.txt";
    auto out = open_output(path);
    out << "wall_time_seconds " << fixed_time(d.wall_time) << '\n'
        << "iterations " << d.iterations << '\n';
    close_output(out, path);
    written.push_back(path.string());
  }
  if (!config.matrix_out.empty()) {
    write_matrix_market(config.matrix_out, p.build.a);
    written.push_back(config.matrix_out);
  }
  return written;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& base_dir,
                       const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source + ": " + e.what());
  }
  require_object(root, source);
  reject_unknown_keys(root, {"datasets", "weights", "constraints", "solver", "output"}, source);

  RunConfig config;
  if (!root.contains("datasets") || !root["datasets"].is_array()) {
    throw ParseError(source + ": 'datasets' must be an array");
  }
  std::size_t index = 0;
  for (const auto& entry : root["datasets"]) {
    const std::string where = source + ": datasets[" + std::to_string(index++) + "]";
    require_object(entry, where);
    reject_unknown_keys(entry, {"name", "path", "dimensions", "metric", "importance", "actuals"},
                        where);
    for (const char* key : {"path", "dimensions", "metric"}) {
      if (!entry.contains(key)) throw ParseError(where + ": missing '" + key + "'");
    }
    DatasetSpec spec;
    spec.path = resolve(base_dir, get_as<std::string>(entry["path"], where + ".path"));
    spec.name = entry.contains("name") ? get_as<std::string>(entry["name"], where + ".name")
                                       : fs::path(spec.path).stem().string();
    spec.dimensions = get_as<std::vector<std::string>>(entry["dimensions"], where + ".dimensions");
    if (spec.dimensions.empty()) throw ParseError(where + ": 'dimensions' is empty");
    if (!entry["metric"].is_string()) {
      throw ParseError(where + ": 'metric' must name exactly one column");
    }
    spec.metric = entry["metric"].get<std::string>();
    if (entry.contains("importance")) {
      spec.importance = get_as<double>(entry["importance"], where + ".importance");
      if (!(spec.importance > 0.0)) throw ParseError(where + ": importance must be positive");
    }
    if (entry.contains("actuals")) spec.actuals = get_as<std::string>(entry["actuals"], where + ".actuals");
    if (!fs::exists(spec.path)) throw ParseError(where + ": file '" + spec.path + "' does not exist");
    config.datasets.push_back(std::move(spec));
  }
  for (std::size_t i = 0; i < config.datasets.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (config.datasets[i].name == config.datasets[j].name) {
        throw ParseError(source + ": dataset name '" + config.datasets[i].name + "' is used twice");
      }
    }
  }

  if (root.contains("weights")) {
    const auto& w = require_object(root["weights"], source + ": weights");
    reject_unknown_keys(w, {"scale_mode", "epsilon"}, source + ": weights");
    if (w.contains("scale_mode")) {
      config.scale_mode = parse_scale_mode(get_as<std::string>(w["scale_mode"], source + ": weights.scale_mode"),
                                           source + ": weights.scale_mode");
    }
    if (w.contains("epsilon")) config.epsilon = get_as<double>(w["epsilon"], source + ": weights.epsilon");
  }
  if (root.contains("constraints")) {
    const auto& c = require_object(root["constraints"], source + ": constraints");
    reject_unknown_keys(c, {"strict", "drop_dependent"}, source + ": constraints");
    if (c.contains("strict")) config.build.strict = get_as<bool>(c["strict"], source + ": constraints.strict");
    if (c.contains("drop_dependent")) {
      config.build.drop_dependent = get_as<bool>(c["drop_dependent"], source + ": constraints.drop_dependent");
    }
  }
  if (root.contains("solver")) {
    const std::string where = source + ": solver";
    const auto& s = require_object(root["solver"], where);
    reject_unknown_keys(s, {"kind", "eps_iter", "eps_fea", "eps_abs", "eps_rel", "rho", "max_iters",
                            "gram_backend"},
                        where);
    auto& st = config.settings;
    try {
      if (s.contains("kind")) config.solver = parse_solver_kind(get_as<std::string>(s["kind"], where + ".kind"));
    } catch (const InvalidInput& e) {
      throw ParseError(where + ": " + e.what());
    }
    if (s.contains("eps_iter")) {
      st.eps_iter = get_as<double>(s["eps_iter"], where + ".eps_iter");
      config.eps_iter_set = true;
    }
    if (s.contains("eps_fea")) {
      st.eps_fea = get_as<double>(s["eps_fea"], where + ".eps_fea");
      config.eps_fea_set = true;
    }
    if (s.contains("eps_abs")) st.eps_abs = get_as<double>(s["eps_abs"], where + ".eps_abs");
    if (s.contains("eps_rel")) st.eps_rel = get_as<double>(s["eps_rel"], where + ".eps_rel");
    if (s.contains("rho")) st.rho = get_as<double>(s["rho"], where + ".rho");
    if (s.contains("max_iters")) st.max_iters = get_as<long>(s["max_iters"], where + ".max_iters");
    if (s.contains("gram_backend")) {
      const auto b = get_as<std::string>(s["gram_backend"], where + ".gram_backend");
      if (b == "cholesky") {
        st.gram.backend = GramBackend::cholesky;
      } else if (b == "conjugate_gradient") {
        st.gram.backend = GramBackend::conjugate_gradient;
      } else {
        throw ParseError(where + ": unknown gram_backend '" + b + "'");
      }
    }
    try {
      st.validate();
    } catch (const InvalidInput& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  config.output_dir = resolve(base_dir, "reconciled");
  if (root.contains("output")) {
    const auto& o = require_object(root["output"], source + ": output");
    reject_unknown_keys(o, {"directory", "matrix"}, source + ": output");
    if (o.contains("directory")) {
      config.output_dir = resolve(base_dir, get_as<std::string>(o["directory"], source + ": output.directory"));
    }
    if (o.contains("matrix")) {
      config.matrix_out = resolve(base_dir, get_as<std::string>(o["matrix"], source + ": output.matrix"));
    }
  }
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), fs::path(path).parent_path().string(), path);
}

void apply_overrides(RunConfig& config, const SettingsOverrides& o) {
  auto& st = config.settings;
  if (o.solver) config.solver = parse_solver_kind(*o.solver);
  if (o.eps_iter) {
    st.eps_iter = *o.eps_iter;
    config.eps_iter_set = true;
  }
  if (o.eps_fea) {
    st.eps_fea = *o.eps_fea;
    config.eps_fea_set = true;
  }
  if (o.eps_abs) st.eps_abs = *o.eps_abs;
  if (o.eps_rel) st.eps_rel = *o.eps_rel;
  if (o.rho) st.rho = *o.rho;
  if (o.max_iters) st.max_iters = static_cast<Index>(*o.max_iters);
  if (o.matrix_out) config.matrix_out = *o.matrix_out;
  st.validate();
}

double mape(const Eigen::Ref<const Vector<double>>& x, const Eigen::Ref<const Vector<double>>& ref) {
  if (x.size() != ref.size()) throw DimensionError("mape: length mismatch");
  double total = 0.0;
  Index count = 0;
  for (Index i = 0; i < x.size(); ++i) {
    if (ref[i] == 0.0 || std::isnan(ref[i])) continue;
    total += std::abs(x[i] - ref[i]) / std::abs(ref[i]);
    ++count;
  }
  return count ? 100.0 * total / static_cast<double>(count) : 0.0;
}

double relative_change(const Eigen::Ref<const Vector<double>>& y,
                       const Eigen::Ref<const Vector<double>>& yhat) {
  const double diff = (y - yhat).norm();
  const double base = y.norm();
  if (base == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / base;
}

void write_diagnostics_text(std::ostream& out, const Diagnostics& d) {
  out << "solver          " << to_string(d.solver) << '\n'
      << "items           " << d.items << '\n'
      << "constraints     " << d.constraints << '\n'
      << "converged       " << (d.converged ? "yes" : "no") << '\n'
      << "iterations      " << d.iterations << '\n'
      << "objective       " << sci(d.objective) << '\n'
      << "relative_change " << sci(d.relative_change) << '\n'
      << "negative_norm   " << sci(d.negative_norm) << '\n'
      << "constraint_norm " << sci(d.constraint_norm) << "\n\n";
  std::size_t width = 7;
  for (const auto& s : d.segments) width = std::max(width, s.name.size());
  out << std::left << std::setw(static_cast<int>(width) + 2) << "segment" << std::right
      << std::setw(8) << "rows" << std::setw(16) << "mape_vs_input" << std::setw(18)
      << "input_mape_act" << std::setw(18) << "recon_mape_act" << '\n';
  for (const auto& s : d.segments) {
    out << std::left << std::setw(static_cast<int>(width) + 2) << s.name << std::right
        << std::setw(8) << s.rows << std::setw(16) << sci(s.mape_vs_input) << std::setw(18)
        << (s.input_mape_vs_actuals ? sci(*s.input_mape_vs_actuals) : "-") << std::setw(18)
        << (s.reconciled_mape_vs_actuals ? sci(*s.reconciled_mape_vs_actuals) : "-") << '\n';
  }
}

void write_diagnostics_csv(std::ostream& out, const Diagnostics& d) {
  write_csv_row(out, {"segment", "rows", "mape_vs_input", "input_mape_vs_actuals",
                      "reconciled_mape_vs_actuals"});
  for (const auto& s : d.segments) {
    write_csv_row(out, {s.name, std::to_string(s.rows), format_number(s.mape_vs_input),
                        s.input_mape_vs_actuals ? format_number(*s.input_mape_vs_actuals) : "",
                        s.reconciled_mape_vs_actuals ? format_number(*s.reconciled_mape_vs_actuals)
                                                     : ""});
  }
  write_csv_row(out, {"all", std::to_string(d.items), "", "", ""});
  // Scalar rows keep the table rectangular: name, value, then blanks.
  write_csv_row(out, {"relative_change", format_number(d.relative_change), "", "", ""});
  write_csv_row(out, {"negative_norm", format_number(d.negative_norm), "", "", ""});
  write_csv_row(out, {"constraint_norm", format_number(d.constraint_norm), "", "", ""});
  write_csv_row(out, {"objective", format_number(d.objective), "", "", ""});
}

ReconcileOutcome run_reconcile(const RunConfig& config, std::ostream& log, bool write) {
  require_projection_tolerances(config);
  auto problem = load_problem(config, log);
  ReconcileOutcome outcome;
  outcome.report = solve_problem(problem, config.solver, config.settings);
  outcome.diagnostics = diagnose(problem, outcome.report, config);
  if (write) outcome.written = write_outputs(config, problem, outcome.report, outcome.diagnostics);
  outcome.build = std::move(problem.build);
  return outcome;
}

std::vector<Violation> run_validate(const RunConfig& config) {
  std::vector<Violation> out;
  auto error = [&out](std::string m) { out.push_back({Violation::Severity::error, std::move(m)}); };
  auto warn = [&out](std::string m) { out.push_back({Violation::Severity::warning, std::move(m)}); };
  if (config.datasets.size() < 2) error("configuration needs at least two datasets");

  std::vector<TabularDataset> datasets;
  bool clean = true;
  for (const auto& spec : config.datasets) {
    try {
      const auto table = read_csv(spec.path);
      auto d = dataset_from_csv(table, spec.name, spec.dimensions, spec.metric, spec.path);
      if (!spec.actuals.empty()) read_actuals(table, spec);
      for (auto& v : validate_dataset(d)) {
        if (v.severity == Violation::Severity::error) clean = false;
        out.push_back(std::move(v));
      }
      datasets.push_back(std::move(d));
    } catch (const Error& e) {
      clean = false;
      error(e.what());
    }
  }
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    for (std::size_t j = i + 1; j < datasets.size(); ++j) {
      if (shared_dimensions(datasets[i], datasets[j]).empty()) {
        warn("datasets '" + datasets[i].name + "' and '" + datasets[j].name +
             "' share no dimension columns; no constraints link them");
      }
    }
  }
  if (clean && datasets.size() >= 2) {
    BuildOptions lenient = config.build;
    lenient.strict = false;
    try {
      const auto build = build_constraints_multi(datasets, lenient);
      for (const auto& w : build.warnings) warn(w);
    } catch (const Error& e) {
      error(e.what());
    }
  }
  return out;
}

std::vector<RhoTrial> run_tune_rho(const RunConfig& config, std::ostream& log) {
  const auto problem = load_problem(config, log);
  std::vector<RhoTrial> trials;
  for (int e = -4; e <= 4; ++e) {
    SolveSettings<double> st = config.settings;
    st.rho = std::pow(10.0, e);
    const auto r = solve_problem(problem, SolverKind::admm, st);
    trials.push_back({st.rho, r.iterations, r.converged, r.wall_time});
  }
  return trials;
}

std::vector<std::string> write_fixture(const GeneratedFixture& fx, const std::string& dir) {
  std::vector<std::string> written;
  const fs::path root(dir);
  fs::create_directories(root);
  double max_forecast = 0.0;
  json datasets = json::array();
  for (std::size_t d = 0; d < fx.datasets.size(); ++d) {
    const auto& ds = fx.datasets[d];
    const fs::path path = root / (ds.name + ".csv");
    auto out = open_output(path);
    auto header = ds.dimension_columns;
    header.push_back(ds.metric_column);
    header.push_back("actual");
    write_csv_row(out, header);
    for (std::size_t r = 0; r < ds.rows.size(); ++r) {
      auto fields = ds.rows[r].dimensions;
      fields.push_back(format_number(ds.rows[r].metric));
      fields.push_back(format_number(fx.actuals[d][r]));
      write_csv_row(out, fields);
      max_forecast = std::max(max_forecast, ds.rows[r].metric);
    }
    close_output(out, path);
    written.push_back(path.string());
    datasets.push_back({{"name", ds.name},
                        {"path", ds.name + ".csv"},
                        {"dimensions", ds.dimension_columns},
                        {"metric", ds.metric_column},
                        {"actuals", "actual"}});
  }
  {
    const fs::path path = root / "hierarchy.tsv";
    auto out = open_output(path);
    out << "# parent\tchild\n";
    const auto& items = fx.hierarchy.items();
    for (const auto& c : fx.hierarchy.constraints()) {
      for (const Index child : c.children) {
        out << items[static_cast<std::size_t>(c.parent)] << '\t'
            << items[static_cast<std::size_t>(child)] << '\n';
      }
    }
    close_output(out, path);
    written.push_back(path.string());
  }
  {
    bool positive = true;
    for (const auto& ds : fx.datasets) {
      for (const auto& r : ds.rows) positive = positive && r.metric > 0.0;
    }
    const double eps = 1e-8 * std::max(1.0, max_forecast);
    json config = {
        {"datasets", datasets},
        {"weights", {{"scale_mode", positive ? "reciprocal" : "reciprocal_squared"}, {"epsilon", 1.0}}},
        {"constraints", {{"strict", false}}},
        {"solver",
         {{"kind", "dykstra"}, {"eps_iter", eps}, {"eps_fea", eps}, {"max_iters", 100000}}},
        {"output", {{"directory", "reconciled"}}}};
    const fs::path path = root / "config.json";
    auto out = open_output(path);
    out << config.dump(2) << '\n';
    close_output(out, path);
    written.push_back(path.string());
  }
  return written;
}

double estimate_bench_bytes(const GridParams& p) {
  const double n = static_cast<double>(p.items());
  const double k_block = static_cast<double>(p.rows + p.cols + 1);
  const double nnz = static_cast<double>(p.blocks) *
                     static_cast<double>(3 * p.rows * p.cols + 2 * p.rows + p.cols + 2);
  // ~16 length-N vectors, A plus its triplets and transposed products, and a
  // Gram block with its factor per grid block treated as dense.
  return 16.0 * 8.0 * n + 3.0 * 16.0 * nnz +
         36.0 * static_cast<double>(p.blocks) * k_block * k_block;
}

double memory_budget_mb(double fallback_mb) {
  if (const char* env = std::getenv("RECON_MEMORY_BUDGET_MB")) {
    double v = 0.0;
    if (!parse_number(env, v) || !(v > 0.0)) {
      throw InvalidInput(std::string("RECON_MEMORY_BUDGET_MB='") + env +
                         "' is not a positive number");
    }
    return v;
  }
  return fallback_mb;
}

std::vector<BenchRow> run_bench(const BenchOptions& options, std::ostream& log) {
  if (options.sizes.empty()) throw InvalidInput("bench: no sizes given");
  const double budget = options.memory_budget_mb * 1024.0 * 1024.0;
  std::vector<GridParams> grids;
  for (const Index size : options.sizes) {
    auto g = grid_params_for_size(size, options.noise, options.seed);
    const double bytes = estimate_bench_bytes(g);
    if (bytes > budget) {
      throw InvalidInput("bench: size " + std::to_string(size) + " needs about " +
                         std::to_string(static_cast<long long>(bytes / (1024.0 * 1024.0))) +
                         " MB, over the " + std::to_string(static_cast<long long>(options.memory_budget_mb)) +
                         " MB budget (RECON_MEMORY_BUDGET_MB)");
    }
    grids.push_back(g);
  }
  std::vector<BenchRow> rows;
  for (const auto& g : grids) {
    const auto inst = make_grid_instance(g);
    WeightSpec<double> ws;
    ws.scale_mode = ScaleMode::reciprocal;
    const auto w = build_weights(ws, inst.forecast);
    SolveSettings<double> st = options.settings;
    const double scale = inst.forecast.cwiseAbs().maxCoeff();
    if (!options.eps_iter_set) st.eps_iter = options.relative_eps * scale;
    if (!options.eps_fea_set) st.eps_fea = options.relative_eps * scale;
    if (!options.rho_set) st.rho = w.entries().mean();
    log << "bench: N=" << g.items() << " K=" << g.constraints() << " (" << g.blocks << " blocks of "
        << g.rows << "x" << g.cols << ")\n";
    for (const auto kind : options.solvers) {
      const auto r = reconcile<double>(kind, inst.a, w, inst.forecast, st);
      BenchRow row;
      row.items = g.items();
      row.constraints = g.constraints();
      row.solver = kind;
      row.wall_time = r.wall_time;
      row.relative_change = relative_change(r.y.values, inst.forecast);
      row.negative_norm = r.y.values.cwiseMin(0.0).norm();
      row.constraint_norm = matvec(inst.a, r.y.values).norm();
      row.iterations = r.iterations;
      row.converged = r.converged;
      log << "  " << to_string(kind) << ": " << fixed_time(r.wall_time) << " s, " << r.iterations
          << " iterations" << (r.converged ? "" : " (not converged)") << '\n';
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows, bool with_timing) {
  std::vector<std::string> header{"items", "constraints", "solver"};
  if (with_timing) header.push_back("time_seconds");
  for (const char* c : {"relative_change", "negative_norm", "constraint_norm", "iterations", "converged"}) {
    header.emplace_back(c);
  }
  write_csv_row(out, header);
  for (const auto& r : rows) {
    std::vector<std::string> f{std::to_string(r.items), std::to_string(r.constraints),
                               std::string(to_string(r.solver))};
    if (with_timing) f.push_back(format_number(r.wall_time));
    f.push_back(format_number(r.relative_change));
    f.push_back(format_number(r.negative_norm));
    f.push_back(format_number(r.constraint_norm));
    f.push_back(std::to_string(r.iterations));
    f.emplace_back(r.converged ? "true" : "false");
    write_csv_row(out, f);
  }
}

void write_bench_table(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << std::right << std::setw(10) << "N" << std::setw(8) << "K" << std::setw(9) << "solver"
      << std::setw(11) << "time[s]" << std::setw(15) << "rel_change" << std::setw(15)
      << "||(y)_-||" << std::setw(15) << "||Ay||" << std::setw(8) << "iters" << std::setw(6)
      << "conv" << '\n';
  for (const auto& r : rows) {
    out << std::setw(10) << r.items << std::setw(8) << r.constraints << std::setw(9)
        << to_string(r.solver) << std::setw(11) << fixed_time(r.wall_time) << std::setw(15)
        << sci(r.relative_change) << std::setw(15) << sci(r.negative_norm) << std::setw(15)
        << sci(r.constraint_norm) << std::setw(8) << r.iterations << std::setw(6)
        << (r.converged ? "yes" : "no") << '\n';
  }
}

}  // namespace recon
