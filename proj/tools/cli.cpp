#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dhtv/data.hpp"
#include "dhtv/errors.hpp"
#include "dhtv/hash.hpp"
#include "dhtv/metrics.hpp"
#include "dhtv/model.hpp"

namespace dhtv::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a64(std::span<const std::uint8_t>(bytes)));
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// NaN becomes null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

class Manifest {
 public:
  explicit Manifest(std::string command) : start_(Clock::now()) {
    j_["command"] = std::move(command);
    j_["config"] = json::object();
    j_["seeds"] = json::array();
    j_["inputs"] = json::array();
    j_["outputs"] = json::array();
    j_["timings_ms"] = json::object();
  }
  json& config() { return j_["config"]; }
  void seed(std::uint64_t s) { j_["seeds"].push_back(s); }
  void input(const fs::path& p) { j_["inputs"].push_back({{"path", p.string()}, {"fnv1a64", file_hash(p)}}); }
  void output(const fs::path& p) { j_["outputs"].push_back({{"path", p.string()}, {"fnv1a64", file_hash(p)}}); }
  void lap(const std::string& name) {
    const auto now = Clock::now();
    j_["timings_ms"][name] = std::chrono::duration<double, std::milli>(now - lap_).count();
    lap_ = now;
  }
  json& extra(const std::string& key) { return j_[key]; }
  void write(const fs::path& path) {
    j_["timings_ms"]["total"] = std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
    out << j_.dump(2) << '\n';
  }

 private:
  json j_;
  Clock::time_point start_;
  Clock::time_point lap_ = Clock::now();
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::kIoError, "failed writing " + path.string());
}

fs::path with_suffix(const fs::path& base, const std::string& suffix) { return fs::path(base.string() + suffix); }

struct SolveFlags {
  double tol = 1e-8;
  std::int64_t max_iters = 200000;
  std::string solver = "auto";

  void add(CLI::App* app) {
    app->add_option("--tol", tol, "Relative objective tolerance")->capture_default_str();
    app->add_option("--max-iters", max_iters, "Iteration budget")->capture_default_str();
    app->add_option("--solver", solver, "auto, fista or admm")
        ->check(CLI::IsMember({"auto", "fista", "admm"}))
        ->capture_default_str();
  }
  SolveConfig config(double lambda) const {
    SolveConfig cfg;
    cfg.lambda = lambda;
    cfg.tol = tol;
    cfg.max_iters = max_iters;
    cfg.solver_kind = parse_solver_kind(solver);
    cfg.validate();
    return cfg;
  }
  void record(json& j) const {
    j["tol"] = tol;
    j["max_iters"] = max_iters;
    j["solver"] = solver;
  }
};

std::vector<double> parse_lambda_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      fail(ErrorCode::kInvalidArgument, "bad lambda value '" + item + "'");
    }
  }
  if (out.empty()) fail(ErrorCode::kInvalidArgument, "empty lambda grid");
  return out;
}

std::vector<double> resolve_grid(const std::string& spec, const FitProblem& problem) {
  if (spec == "auto") return default_lambda_grid(problem);
  return parse_lambda_list(spec);
}

// Feature columns of `table` in model order: by name when the header has all
// of the model's feature names, otherwise every column except `target`.
Eigen::MatrixXd select_features(const Table& table, const CpwlModel& model, std::optional<std::size_t> target) {
  const auto& names = model.metadata().feature_names;
  std::vector<std::size_t> cols;
  bool by_name = !names.empty();
  for (const auto& n : names) {
    const auto it = std::find(table.names.begin(), table.names.end(), n);
    if (it == table.names.end()) {
      by_name = false;
      break;
    }
    cols.push_back(static_cast<std::size_t>(it - table.names.begin()));
  }
  if (!by_name) {
    cols.clear();
    for (std::size_t j = 0; j < table.names.size(); ++j) {
      if (!target || j != *target) cols.push_back(j);
    }
  }
  if (static_cast<int>(cols.size()) != model.dimension()) {
    fail(ErrorCode::kDimensionMismatch, "model expects " + std::to_string(model.dimension()) +
                                            " feature columns, input has " + std::to_string(cols.size()));
  }
  Eigen::MatrixXd x(table.values.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    x.col(static_cast<Eigen::Index>(k)) = table.values.col(static_cast<Eigen::Index>(cols[k]));
  }
  return x;
}

std::size_t column_index(const Table& table, const std::string& target) {
  const auto it = std::find(table.names.begin(), table.names.end(), target);
  if (it != table.names.end()) return static_cast<std::size_t>(it - table.names.begin());
  try {
    std::size_t used = 0;
    const unsigned long idx = std::stoul(target, &used);
    if (used == target.size() && idx < table.names.size()) return idx;
  } catch (const std::exception&) {
  }
  fail(ErrorCode::kMissingColumn, "target column '" + target + "' not found");
}

// Random-grid HTV of the interpolating fit (c = deduplicated targets), the
// normalizer of reported HTV values. Only defined when grid = data points.
double interpolation_htv(const FitProblem& problem, std::uint64_t seed, int n_grid) {
  if (!problem.identity_forward()) return kNaN;
  const CpwlModel interp(problem.triangulation, problem.targets, problem.standardization, 0.0);
  return random_triangulation_htv(as_regressor(interp), interp.dimension(), n_grid, seed);
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string target;
  std::optional<double> lambda;
  std::string lambda_grid;
  std::uint64_t seed = 0;
  std::string split;
  std::string out;
  std::string grid_csv;
  bool no_header = false;
  bool warm_start = false;
  int threads = 0;
  int htv_grid = 1000;
  SolveFlags solve;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  Manifest manifest("fit");
  CsvOptions csv;
  csv.header = !a.no_header;
  if (a.lambda.has_value() == !a.lambda_grid.empty()) {
    fail(ErrorCode::kInvalidArgument, "give exactly one of --lambda and --lambda-grid");
  }
  const Dataset ds = load_csv(a.data, a.target, csv);
  manifest.input(a.data);
  const SplitSpec spec = SplitSpec::parse(a.split.empty() ? (a.lambda ? "1,0,0" : "0.7,0.15,0.15") : a.split, a.seed);
  const SplitResult parts = split(ds, spec);
  manifest.seed(a.seed);
  manifest.lap("load");

  FitOptions fopts;
  if (!a.grid_csv.empty()) {
    fopts.grid = GridPolicy::kExplicit;
    fopts.explicit_grid = load_table(a.grid_csv, csv).values;
    manifest.input(a.grid_csv);
  }
  const FitProblem problem = prepare_fit(parts.train, fopts);
  manifest.lap("prepare");

  const fs::path model_path = a.out;
  if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
  std::optional<CpwlModel> model;
  std::optional<fs::path> lambda_report;
  if (a.lambda) {
    model = solve_fit(problem, a.solve.config(*a.lambda));
  } else {
    const std::vector<double> lambdas = resolve_grid(a.lambda_grid, problem);
    GridSearchOptions gopts;
    gopts.fit = fopts;
    gopts.warm_start = a.warm_start;
    gopts.threads = a.threads;
    gopts.seed = a.seed;
    const GridSearchResult gs =
        grid_search_lambda(problem, parts.train, parts.validation, lambdas, a.solve.config(0.0), gopts);
    std::ostringstream rep;
    write_grid_report(rep, gs);
    lambda_report = with_suffix(model_path, ".lambdas.csv");
    write_text(*lambda_report, rep.str());
    model = gs.models[gs.best_index];
  }
  manifest.lap("solve");
  model->save(model_path);

  std::vector<MetricReport> reports = {
      evaluate_model(*model, parts.train, parts.validation, parts.test, a.seed, a.htv_grid)};
  const double normalizer = interpolation_htv(problem, a.seed, a.htv_grid);
  if (normalizer > 0.0) normalize(reports, normalizer);
  std::ostringstream rep;
  write_metric_reports(rep, reports);
  const fs::path metrics_path = with_suffix(model_path, ".metrics.csv");
  write_text(metrics_path, rep.str());
  manifest.lap("metrics");

  manifest.output(model_path);
  if (lambda_report) manifest.output(*lambda_report);
  manifest.output(metrics_path);
  json& cfg = manifest.config();
  cfg["target"] = a.target;
  if (a.lambda) cfg["lambda"] = *a.lambda;
  else cfg["lambda_grid"] = a.lambda_grid;
  cfg["split"] = {spec.train, spec.validation, spec.test};
  cfg["grid"] = a.grid_csv.empty() ? "data_points" : "explicit";
  cfg["htv_grid"] = a.htv_grid;
  a.solve.record(cfg);
  const auto& meta = model->metadata();
  json summary = {{"model", model_path.string()},
                  {"lambda", model->lambda()},
                  {"solver", std::string(to_string(meta.solver))},
                  {"termination", std::string(to_string(meta.termination))},
                  {"iterations", meta.iterations},
                  {"objective", num(meta.objective)},
                  {"htv", num(meta.htv)},
                  {"n_parameters", model->num_parameters()},
                  {"train_mse", num(reports[0].train_mse)},
                  {"validation_mse", num(reports[0].validation_mse)},
                  {"test_mse", num(reports[0].test_mse)}};
  manifest.extra("result") = summary;
  manifest.write(with_suffix(model_path, ".manifest.json"));
  out << summary.dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string model;
  std::string data;
  std::string out;
  bool no_header = false;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  Manifest manifest("predict");
  const CpwlModel model = CpwlModel::load(a.model);
  CsvOptions csv;
  csv.header = !a.no_header;
  const Table table = load_table(a.data, csv);
  manifest.input(a.model);
  manifest.input(a.data);
  std::optional<std::size_t> target;
  const auto& tname = model.metadata().target_name;
  const auto it = std::find(table.names.begin(), table.names.end(), tname);
  if (csv.header && !tname.empty() && it != table.names.end()) {
    target = static_cast<std::size_t>(it - table.names.begin());
  }
  const Eigen::VectorXd pred = model.predict(select_features(table, model, target));
  manifest.lap("predict");
  std::string text = "prediction\n";
  for (double v : pred) text += fmt(v) + "\n";
  if (a.out.empty()) {
    out << text;
    return 0;
  }
  write_text(a.out, text);
  manifest.output(a.out);
  manifest.config()["rows"] = pred.size();
  manifest.write(with_suffix(a.out, ".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string model;
  std::string data;
  std::string target;
  std::string format = "json";
  std::optional<double> normalizer;
  std::uint64_t seed = 0;
  int htv_grid = 1000;
  double epsilon = 0.1;
  bool no_header = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
  const CpwlModel model = CpwlModel::load(a.model);
  CsvOptions csv;
  csv.header = !a.no_header;
  const Table table = load_table(a.data, csv);
  const std::string target = a.target.empty() ? model.metadata().target_name : a.target;
  if (target.empty()) fail(ErrorCode::kMissingColumn, "no --target given and the model has no target name");
  const std::size_t tc = column_index(table, target);
  const Eigen::MatrixXd x = select_features(table, model, tc);
  const Eigen::VectorXd y = table.values.col(static_cast<Eigen::Index>(tc));

  const double err = mse(model.predict(x), y);
  const GridSample g = sample_on_random_grid(as_regressor(model), model.dimension(), a.htv_grid, a.seed);
  const double sparsity = sparsity_metric(g.regularization, g.values, a.epsilon);
  const double normalized = a.normalizer ? g.htv / *a.normalizer : kNaN;

  if (a.format == "json") {
    json j = {{"mse", err},
              {"htv_raw", num(g.htv)},
              {"htv_normalized", num(normalized)},
              {"sparsity_percent", sparsity},
              {"n_parameters", model.num_parameters()},
              {"lambda", model.lambda()},
              {"rows", y.size()},
              {"seed", a.seed},
              {"htv_grid", a.htv_grid},
              {"epsilon", a.epsilon}};
    out << j.dump() << '\n';
  } else {
    out << "mse,htv_raw,htv_normalized,sparsity_percent,n_parameters,lambda,rows,seed\n";
    out << fmt(err) << ',' << fmt(g.htv) << ',' << fmt(normalized) << ',' << fmt(sparsity) << ','
        << model.num_parameters() << ',' << fmt(model.lambda()) << ',' << y.size() << ',' << a.seed << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- export-mesh

struct ExportArgs {
  std::string model;
  std::string out;
  bool raw = false;
};

int cmd_export_mesh(const ExportArgs& a, std::ostream&) {
  Manifest manifest("export-mesh");
  const CpwlModel model = CpwlModel::load(a.model);
  manifest.input(a.model);
  if (model.dimension() != 2) {
    fail(ErrorCode::kUnsupportedDimension,
         "mesh export needs a 2-D model, this one has dimension " + std::to_string(model.dimension()));
  }
  const Triangulation& t = model.triangulation();
  const Standardization& s = model.standardization();
  std::string text = "# dhtv CPWL mesh: " + std::to_string(t.num_vertices()) + " vertices, " +
                     std::to_string(t.num_simplices()) + " faces\n";
  for (VertexId v = 0; v < t.num_vertices(); ++v) {
    Eigen::Vector2d p = t.vertex(v);
    if (a.raw) p = s.mean + p.cwiseProduct(s.scale);
    text += "v " + fmt(p[0]) + " " + fmt(p[1]) + " " + fmt(model.coefficients()[v]) + "\n";
  }
  for (SimplexId k = 0; k < t.num_simplices(); ++k) {
    const auto f = t.simplex(k);
    std::array<VertexId, 3> ids = {f[0], f[1], f[2]};
    // Counter-clockwise seen from +z.
    const Eigen::Vector2d e1 = t.vertex(ids[1]) - t.vertex(ids[0]);
    const Eigen::Vector2d e2 = t.vertex(ids[2]) - t.vertex(ids[0]);
    if (e1[0] * e2[1] - e1[1] * e2[0] < 0.0) std::swap(ids[1], ids[2]);
    text += "f " + std::to_string(ids[0] + 1) + " " + std::to_string(ids[1] + 1) + " " + std::to_string(ids[2] + 1) + "\n";
  }
  write_text(a.out, text);
  manifest.output(a.out);
  manifest.config()["coordinates"] = a.raw ? "raw" : "standardized";
  manifest.write(with_suffix(a.out, ".manifest.json"));
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  std::string data;
  std::string target;
  std::string lambda_grid = "auto";
  std::uint64_t seed = 0;
  std::string split = "0.7,0.15,0.15";
  std::string out;
  bool no_header = false;
  bool warm_start = false;
  int threads = 0;
  SolveFlags solve;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  Manifest manifest("sweep");
  CsvOptions csv;
  csv.header = !a.no_header;
  const Dataset ds = load_csv(a.data, a.target, csv);
  manifest.input(a.data);
  manifest.seed(a.seed);
  const SplitResult parts = split(ds, SplitSpec::parse(a.split, a.seed));
  const FitProblem problem = prepare_fit(parts.train);
  const std::vector<double> lambdas = resolve_grid(a.lambda_grid, problem);
  GridSearchOptions gopts;
  gopts.warm_start = a.warm_start;
  gopts.threads = a.threads;
  gopts.seed = a.seed;
  const GridSearchResult gs = grid_search_lambda(problem, parts.train, parts.validation, lambdas, a.solve.config(0.0), gopts);
  manifest.lap("sweep");
  std::ostringstream rep;
  write_grid_report(rep, gs);
  if (a.out.empty()) {
    out << rep.str();
    return 0;
  }
  write_text(a.out, rep.str());
  manifest.output(a.out);
  manifest.config()["target"] = a.target;
  manifest.config()["lambda_grid"] = a.lambda_grid;
  manifest.config()["split"] = a.split;
  a.solve.record(manifest.config());
  manifest.extra("best_lambda") = gs.best_lambda;
  manifest.write(with_suffix(a.out, ".manifest.json"));
  out << json({{"best_lambda", gs.best_lambda}, {"report", a.out}}).dump() << '\n';
  return 0;
}

// ---------------------------------------------------------------- reproduce-table1

struct TableArgs {
  std::string data;
  std::string target;
  int runs = 30;
  std::uint64_t seed = 0;
  std::string lambda_grid = "auto";
  std::string split = "0.7,0.15,0.15";
  std::string out;
  std::vector<std::string> baselines;
  int htv_grid = 1000;
  bool no_header = false;
  int threads = 0;
  SolveFlags solve;
};

int cmd_reproduce_table1(const TableArgs& a, std::ostream& out) {
  Manifest manifest("reproduce-table1");
  CsvOptions csv;
  csv.header = !a.no_header;
  if (a.runs < 1) fail(ErrorCode::kInvalidArgument, "--runs must be positive");
  const Dataset ds = load_csv(a.data, a.target, csv);
  manifest.input(a.data);
  std::vector<MetricReport> runs;
  double normalizer = 0.0;
  for (int r = 0; r < a.runs; ++r) {
    const std::uint64_t seed = a.seed + static_cast<std::uint64_t>(r);
    manifest.seed(seed);
    const SplitResult parts = split(ds, SplitSpec::parse(a.split, seed));
    const FitProblem problem = prepare_fit(parts.train);
    GridSearchOptions gopts;
    gopts.threads = a.threads;
    gopts.seed = seed;
    const GridSearchResult gs = grid_search_lambda(problem, parts.train, parts.validation,
                                                   resolve_grid(a.lambda_grid, problem), a.solve.config(0.0), gopts);
    MetricReport rep = evaluate_model(gs.models[gs.best_index], parts.train, parts.validation, parts.test, seed, a.htv_grid);
    rep.seed = seed;
    runs.push_back(rep);
    normalizer += interpolation_htv(problem, seed, a.htv_grid) / a.runs;
    manifest.lap("run_" + std::to_string(r));
  }
  normalize(runs, normalizer);
  const fs::path dir = a.out;
  fs::create_directories(dir);
  std::ostringstream per_run;
  write_metric_reports(per_run, runs);
  write_text(dir / "dhtv_runs.csv", per_run.str());

  // Baselines are user-supplied metric rows; averaged per method.
  struct Acc {
    double train = 0, test = 0, htv = 0, sparsity = 0, params = 0;
    int n = 0;
  };
  std::map<std::string, Acc> base;
  std::vector<std::string> order;
  for (const auto& path : a.baselines) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::kIoError, "cannot read " + path);
    manifest.input(path);
    std::string header;
    std::getline(in, header);
    std::string line;
    std::int64_t row = 1;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty() || line == "\r") continue;
      std::stringstream ss(line);
      std::string method;
      std::getline(ss, method, ',');
      std::istringstream rest(ss.str().substr(method.size() + 1));
      Table t = parse_table(rest, CsvOptions{false, ','});
      if (t.values.rows() != 1 || t.values.cols() != 5) {
        fail(ErrorCode::kParseError, path + " row " + std::to_string(row) +
                                         ": expected method,train_mse,test_mse,htv_normalized,sparsity_percent,n_parameters");
      }
      if (!base.contains(method)) order.push_back(method);
      Acc& acc = base[method];
      acc.train += t.values(0, 0);
      acc.test += t.values(0, 1);
      acc.htv += t.values(0, 2);
      acc.sparsity += t.values(0, 3);
      acc.params += t.values(0, 4);
      ++acc.n;
    }
  }
  const MetricReport mean = mean_report(runs);
  std::string table = "method,train_mse,test_mse,htv_normalized,sparsity_percent,n_parameters\n";
  table += "DHTV," + fmt(mean.train_mse) + "," + fmt(mean.test_mse) + "," + fmt(mean.htv_normalized) + "," +
           fmt(mean.sparsity_percent) + "," + std::to_string(mean.n_parameters) + "\n";
  for (const auto& m : order) {
    const Acc& acc = base[m];
    const double n = acc.n;
    table += m + "," + fmt(acc.train / n) + "," + fmt(acc.test / n) + "," + fmt(acc.htv / n) + "," +
             fmt(acc.sparsity / n) + "," + fmt(acc.params / n) + "\n";
  }
  write_text(dir / "table1.csv", table);
  manifest.output(dir / "dhtv_runs.csv");
  manifest.output(dir / "table1.csv");
  manifest.config()["runs"] = a.runs;
  manifest.config()["split"] = a.split;
  manifest.config()["lambda_grid"] = a.lambda_grid;
  manifest.config()["htv_normalizer"] = normalizer;
  a.solve.record(manifest.config());
  manifest.write(dir / "manifest.json");
  out << table;
  return 0;
}

void print_error(std::ostream& err, const std::string& name, const std::string& message, int code) {
  err << json({{"error", name}, {"message", message}, {"exit_code", code}}).dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Delaunay-based CPWL regression with HTV regularization", "dhtv"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "dhtv 0.1.0");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model; writes the model, metrics, optional lambda report and manifest");
  fit_cmd->add_option("data", fit.data, "Training CSV")->required();
  fit_cmd->add_option("--target", fit.target, "Target column name or 0-based index")->required();
  fit_cmd->add_option("--lambda", fit.lambda, "Fixed regularization weight");
  fit_cmd->add_option("--lambda-grid", fit.lambda_grid, "'auto' or comma-separated lambdas (picked on validation)");
  fit_cmd->add_option("--seed", fit.seed, "Split and random-grid seed")->capture_default_str();
  fit_cmd->add_option("--split", fit.split, "train,validation,test fractions (default 1,0,0 with --lambda, else 0.7,0.15,0.15)");
  fit_cmd->add_option("--out", fit.out, "Model file; reports are written next to it")->required();
  fit_cmd->add_option("--grid", fit.grid_csv, "CSV of explicit grid points (features only)");
  fit_cmd->add_option("--threads", fit.threads, "Grid-search threads (0 = all cores)");
  fit_cmd->add_option("--htv-grid", fit.htv_grid, "Points in the random HTV grid")->capture_default_str();
  fit_cmd->add_flag("--warm-start", fit.warm_start, "Warm-start the lambda grid (sequential)");
  fit_cmd->add_flag("--no-header", fit.no_header, "CSV has no header row");
  fit.solve.add(fit_cmd);

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Predict every row of a CSV");
  pred_cmd->add_option("data", pred.data, "Input CSV")->required();
  pred_cmd->add_option("--model", pred.model, "Model file")->required();
  pred_cmd->add_option("--out", pred.out, "Output CSV (stdout if omitted)");
  pred_cmd->add_flag("--no-header", pred.no_header, "CSV has no header row");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "MSE, random-grid HTV and sparsity of a model on a CSV");
  eval_cmd->add_option("data", ev.data, "Labelled CSV")->required();
  eval_cmd->add_option("--model", ev.model, "Model file")->required();
  eval_cmd->add_option("--target", ev.target, "Target column (default: the model's)");
  eval_cmd->add_option("--format", ev.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
  eval_cmd->add_option("--normalizer", ev.normalizer, "HTV normalizer (mean HTV of the interpolating fit)");
  eval_cmd->add_option("--seed", ev.seed, "Random-grid seed")->capture_default_str();
  eval_cmd->add_option("--htv-grid", ev.htv_grid, "Points in the random HTV grid")->capture_default_str();
  eval_cmd->add_option("--epsilon", ev.epsilon, "Sparsity threshold")->capture_default_str();
  eval_cmd->add_flag("--no-header", ev.no_header, "CSV has no header row");

  ExportArgs ex;
  auto* ex_cmd = app.add_subcommand("export-mesh", "Write a 2-D model as an OBJ surface");
  ex_cmd->add_option("--model", ex.model, "Model file")->required();
  ex_cmd->add_option("--out", ex.out, "OBJ path")->required();
  ex_cmd->add_flag("--raw", ex.raw, "Use raw instead of standardized coordinates");

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "Per-lambda train/validation report");
  sw_cmd->add_option("data", sw.data, "CSV")->required();
  sw_cmd->add_option("--target", sw.target, "Target column")->required();
  sw_cmd->add_option("--lambda-grid", sw.lambda_grid, "'auto' or comma-separated lambdas")->capture_default_str();
  sw_cmd->add_option("--seed", sw.seed, "Split seed")->capture_default_str();
  sw_cmd->add_option("--split", sw.split, "train,validation,test fractions")->capture_default_str();
  sw_cmd->add_option("--out", sw.out, "Report CSV (stdout if omitted)");
  sw_cmd->add_option("--threads", sw.threads, "Threads (0 = all cores)");
  sw_cmd->add_flag("--warm-start", sw.warm_start, "Warm-start along the grid (sequential)");
  sw_cmd->add_flag("--no-header", sw.no_header, "CSV has no header row");
  sw.solve.add(sw_cmd);

  TableArgs tb;
  auto* tb_cmd = app.add_subcommand("reproduce-table1", "Seeded repeated splits with validation-selected lambda");
  tb_cmd->add_option("data", tb.data, "CSV")->required();
  tb_cmd->add_option("--target", tb.target, "Target column")->required();
  tb_cmd->add_option("--runs", tb.runs, "Number of seeded splits")->capture_default_str();
  tb_cmd->add_option("--seed", tb.seed, "First seed; run r uses seed + r")->capture_default_str();
  tb_cmd->add_option("--lambda-grid", tb.lambda_grid, "'auto' or comma-separated lambdas")->capture_default_str();
  tb_cmd->add_option("--split", tb.split, "train,validation,test fractions")->capture_default_str();
  tb_cmd->add_option("--out", tb.out, "Output directory")->required();
  tb_cmd->add_option("--baseline", tb.baselines,
                     "CSV of baseline rows: method,train_mse,test_mse,htv_normalized,sparsity_percent,n_parameters");
  tb_cmd->add_option("--htv-grid", tb.htv_grid, "Points in the random HTV grid")->capture_default_str();
  tb_cmd->add_option("--threads", tb.threads, "Threads (0 = all cores)");
  tb_cmd->add_flag("--no-header", tb.no_header, "CSV has no header row");
  tb.solve.add(tb_cmd);

  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << "dhtv 0.1.0\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "UsageError", e.what(), 2);
    return 2;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*pred_cmd) return cmd_predict(pred, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*ex_cmd) return cmd_export_mesh(ex, out);
    if (*sw_cmd) return cmd_sweep(sw, out);
    if (*tb_cmd) return cmd_reproduce_table1(tb, out);
  } catch (const Error& e) {
    const int code = is_numerical(e.code()) ? 3 : 2;
    print_error(err, std::string(error_name(e.code())), e.what(), code);
    return code;
  } catch (const fs::filesystem_error& e) {
    print_error(err, "IoError", e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    print_error(err, "InternalError", e.what(), 3);
    return 3;
  }
  return 2;
}

}  // namespace dhtv::cli
