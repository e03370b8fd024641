#include "dhtv/data.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "dhtv/errors.hpp"
#include "dhtv/operators.hpp"

namespace dhtv {
namespace {

struct Record {
  std::int64_t line = 0;
  std::vector<std::string> fields;
};

// RFC-4180 records; quoted fields may hold delimiters, quotes ("") and newlines.
std::vector<Record> read_records(std::istream& in, char delim) {
  std::vector<Record> records;
  Record cur;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  bool after_quote = false;
  std::int64_t line = 1;
  cur.line = 1;
  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
    after_quote = false;
  };
  auto end_record = [&] {
    end_field();
    const bool blank = cur.fields.size() == 1 && cur.fields[0].empty();
    if (!blank) records.push_back(std::move(cur));
    cur = Record{};
    cur.line = line;
  };
  char ch;
  while (in.get(ch)) {
    if (quoted) {
      if (ch == '"') {
        if (in.peek() == '"') {
          in.get(ch);
          field.push_back('"');
        } else {
          quoted = false;
          after_quote = true;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    if (ch == delim) {
      end_field();
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && in.peek() == '\n') in.get(ch);
      ++line;
      end_record();
    } else if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else {
      if (after_quote && ch != ' ' && ch != '\t') {
        fail(ErrorCode::kParseError, "row " + std::to_string(cur.line) + ", column " +
                                         std::to_string(cur.fields.size() + 1) + ": text after closing quote");
      }
      if (!after_quote) field.push_back(ch);
      field_started = true;
    }
  }
  if (quoted) fail(ErrorCode::kParseError, "row " + std::to_string(cur.line) + ": unterminated quoted field");
  if (field_started || !cur.fields.empty()) end_record();
  return records;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

double parse_number(const std::string& text, std::int64_t row, std::size_t col) {
  std::string_view s = trim(text);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    fail(ErrorCode::kParseError, "row " + std::to_string(row) + ", column " + std::to_string(col + 1) +
                                     ": not a finite number: '" + text + "'");
  }
  return v;
}

Table to_table(std::vector<Record> records, const CsvOptions& options) {
  Table t;
  std::size_t first = 0;
  if (options.header) {
    if (records.empty()) fail(ErrorCode::kParseError, "CSV is empty (no header row)");
    for (const auto& f : records[0].fields) t.names.emplace_back(trim(f));
    first = 1;
  } else if (!records.empty()) {
    for (std::size_t j = 0; j < records[0].fields.size(); ++j) t.names.push_back("c" + std::to_string(j));
  }
  const std::size_t width = t.names.size();
  t.values.resize(static_cast<Eigen::Index>(records.size() - first), static_cast<Eigen::Index>(width));
  for (std::size_t r = first; r < records.size(); ++r) {
    const Record& rec = records[r];
    if (rec.fields.size() != width) {
      fail(ErrorCode::kParseError, "row " + std::to_string(rec.line) + ": expected " + std::to_string(width) +
                                       " fields, found " + std::to_string(rec.fields.size()));
    }
    for (std::size_t j = 0; j < width; ++j) {
      t.values(static_cast<Eigen::Index>(r - first), static_cast<Eigen::Index>(j)) =
          parse_number(rec.fields[j], rec.line, j);
    }
  }
  return t;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot read " + path.string());
  return in;
}

std::size_t resolve_column(const Table& t, const std::string& target) {
  const auto it = std::find(t.names.begin(), t.names.end(), target);
  if (it != t.names.end()) return static_cast<std::size_t>(it - t.names.begin());
  std::size_t idx = 0;
  const auto [ptr, ec] = std::from_chars(target.data(), target.data() + target.size(), idx);
  if (!target.empty() && ec == std::errc() && ptr == target.data() + target.size()) {
    if (idx < t.names.size()) return idx;
  }
  fail(ErrorCode::kMissingColumn, "target column '" + target + "' not found");
}

// Unbiased integer in [0, bound].
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  if (bound == std::numeric_limits<std::uint64_t>::max()) return rng();
  const std::uint64_t range = bound + 1;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % range;
}

double mean_squared(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

}  // namespace

Table parse_table(std::istream& in, const CsvOptions& options) {
  return to_table(read_records(in, options.delimiter), options);
}

Table load_table(const std::filesystem::path& path, const CsvOptions& options) {
  auto in = open_input(path);
  return parse_table(in, options);
}

Dataset parse_csv(std::istream& in, const std::string& target, const CsvOptions& options) {
  Table t = parse_table(in, options);
  const std::size_t tc = resolve_column(t, target);
  Dataset ds;
  const auto cols = static_cast<Eigen::Index>(t.names.size());
  ds.features.resize(t.values.rows(), cols - 1);
  for (Eigen::Index j = 0, k = 0; j < cols; ++j) {
    if (static_cast<std::size_t>(j) == tc) continue;
    ds.features.col(k++) = t.values.col(j);
    ds.feature_names.push_back(t.names[static_cast<std::size_t>(j)]);
  }
  ds.targets = t.values.col(static_cast<Eigen::Index>(tc));
  ds.target_name = t.names[tc];
  return ds;
}

Dataset load_csv(const std::filesystem::path& path, const std::string& target, const CsvOptions& options) {
  auto in = open_input(path);
  return parse_csv(in, target, options);
}

SplitSpec SplitSpec::parse(const std::string& text, std::uint64_t seed) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(parse_number(item, 1, parts.size()));
  if (parts.size() != 3) fail(ErrorCode::kInvalidArgument, "split needs three fractions, got '" + text + "'");
  SplitSpec s{parts[0], parts[1], parts[2], seed};
  s.validate();
  return s;
}

void SplitSpec::validate() const {
  for (double f : {train, validation, test}) {
    if (!(f >= 0.0 && f <= 1.0)) fail(ErrorCode::kInvalidArgument, "split fractions must lie in [0, 1]");
  }
  if (std::abs(train + validation + test - 1.0) > 1e-9) {
    fail(ErrorCode::kInvalidArgument, "split fractions must sum to 1");
  }
}

SplitResult split(const Dataset& ds, const SplitSpec& spec) {
  spec.validate();
  const std::int64_t m = ds.size();
  std::vector<std::int64_t> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    for (Eigen::Index j = 0; j < ds.features.cols(); ++j) {
      if (ds.features(a, j) != ds.features(b, j)) return ds.features(a, j) < ds.features(b, j);
    }
    return ds.targets[a] < ds.targets[b];
  });
  std::mt19937_64 rng(spec.seed);
  for (std::int64_t i = m - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)], order[bounded(rng, static_cast<std::uint64_t>(i))]);
  }
  // The epsilon keeps e.g. 100 * 0.29 from flooring to 28.
  const auto n_val = static_cast<std::int64_t>(std::floor(static_cast<double>(m) * spec.validation + 1e-9));
  const auto n_test = static_cast<std::int64_t>(std::floor(static_cast<double>(m) * spec.test + 1e-9));
  const std::int64_t n_train = m - n_val - n_test;

  SplitResult out;
  out.train_rows.assign(order.begin(), order.begin() + n_train);
  out.validation_rows.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test_rows.assign(order.begin() + n_train + n_val, order.end());
  out.train = ds.subset(out.train_rows);
  out.validation = ds.subset(out.validation_rows);
  out.test = ds.subset(out.test_rows);
  return out;
}

std::vector<double> default_lambda_grid(const FitProblem& problem, int count, double lo, double hi) {
  if (count < 1 || !(lo > 0.0) || !(hi >= lo)) fail(ErrorCode::kInvalidArgument, "invalid lambda grid bounds");
  double scale = 0.0;
  if (problem.regularization.rows() > 0) {
    Eigen::VectorXd y = problem.targets;
    if (!problem.identity_forward()) y = problem.forward.multiply_transpose(problem.targets);
    scale = problem.regularization.multiply(y).lpNorm<Eigen::Infinity>();
  }
  if (!(scale > 0.0)) scale = 1.0;
  std::vector<double> grid(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    grid[static_cast<std::size_t>(i)] = scale * lo * std::pow(hi / lo, t);
  }
  return grid;
}

GridSearchResult grid_search_lambda(const Dataset& train, const Dataset& validation, const std::vector<double>& lambdas,
                                    const SolveConfig& cfg, const GridSearchOptions& options) {
  return grid_search_lambda(prepare_fit(train, options.fit), train, validation, lambdas, cfg, options);
}

GridSearchResult grid_search_lambda(const FitProblem& problem, const Dataset& train, const Dataset& validation,
                                    const std::vector<double>& lambdas, const SolveConfig& cfg,
                                    const GridSearchOptions& options) {
  if (lambdas.empty()) fail(ErrorCode::kInvalidArgument, "lambda grid is empty");
  for (double l : lambdas) {
    if (!(l >= 0.0) || !std::isfinite(l)) fail(ErrorCode::kInvalidArgument, "lambdas must be finite and nonnegative");
  }
  validation.validate();
  train.validate();
  const Triangulation& tri = *problem.triangulation;
  const SparseMatrix e_train = evaluation_operator(tri, problem.standardization.apply(train.features));
  const SparseMatrix e_val = evaluation_operator(tri, problem.standardization.apply(validation.features));

  const std::size_t n = lambdas.size();
  std::vector<std::size_t> ascending(n);
  std::iota(ascending.begin(), ascending.end(), 0);
  std::stable_sort(ascending.begin(), ascending.end(), [&](auto a, auto b) { return lambdas[a] < lambdas[b]; });

  GridSearchResult out;
  out.seed = options.seed;
  out.table.resize(n);
  out.models.resize(n);
  std::vector<std::exception_ptr> errors(n);

  auto run = [&](std::size_t i, const std::optional<Eigen::VectorXd>& warm, SolveReport* report) {
    SolveConfig c = cfg;
    c.lambda = lambdas[i];
    CpwlModel model = solve_fit(problem, c, warm, report);
    LambdaResult& row = out.table[i];
    row.lambda = lambdas[i];
    row.train_mse = mean_squared(e_train.multiply(model.coefficients()), train.targets);
    row.validation_mse = mean_squared(e_val.multiply(model.coefficients()), validation.targets);
    row.htv = model.metadata().htv;
    row.objective = model.metadata().objective;
    row.iterations = model.metadata().iterations;
    row.termination = model.metadata().termination;
    row.solver = model.metadata().solver;
    out.models[i] = std::move(model);
  };

  if (options.warm_start) {
    std::optional<Eigen::VectorXd> warm;
    for (std::size_t i : ascending) {
      SolveReport report;
      run(i, warm, &report);
      if (report.u_hat.size() > 0) warm = std::move(report.u_hat);
    }
  } else {
    unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads) : std::thread::hardware_concurrency();
    threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(n));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k; (k = next.fetch_add(1)) < n;) {
        try {
          run(ascending[k], std::nullopt, nullptr);
        } catch (...) {
          errors[ascending[k]] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (std::size_t i : ascending) {
      if (errors[i]) std::rethrow_exception(errors[i]);
    }
  }

  const double tie = 1e-12 * std::max(validation.targets.squaredNorm() / static_cast<double>(validation.size()),
                                      std::numeric_limits<double>::min());
  std::size_t best = ascending.front();
  for (std::size_t i : ascending) {
    if (out.table[i].validation_mse < out.table[best].validation_mse - tie) best = i;
  }
  out.best_index = best;
  out.best_lambda = lambdas[best];
  return out;
}

void write_grid_report(std::ostream& out, const GridSearchResult& result) {
  out << "lambda,train_mse,validation_mse,htv,objective,iterations,termination,solver,selected,seed\n";
  char buf[512];
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const LambdaResult& r = result.table[i];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%lld,%s,%s,%d,%llu\n", r.lambda, r.train_mse,
                  r.validation_mse, r.htv, r.objective, static_cast<long long>(r.iterations),
                  to_string(r.termination).data(), to_string(r.solver).data(), i == result.best_index ? 1 : 0,
                  static_cast<unsigned long long>(result.seed));
    out << buf;
  }
}

}  // namespace dhtv
