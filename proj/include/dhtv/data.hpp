#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dhtv/dataset.hpp"
#include "dhtv/model.hpp"
#include "dhtv/solver.hpp"

namespace dhtv {

struct CsvOptions {
  bool header = true;
  char delimiter = ',';
};

/// `target` names a header column, or is a 0-based column index. With no
/// header, columns are named "c0", "c1", ...
Dataset parse_csv(std::istream& in, const std::string& target, const CsvOptions& options = {});
Dataset load_csv(const std::filesystem::path& path, const std::string& target, const CsvOptions& options = {});

/// Raw numeric table, every column kept (for prediction inputs).
struct Table {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};
Table parse_table(std::istream& in, const CsvOptions& options = {});
Table load_table(const std::filesystem::path& path, const CsvOptions& options = {});

struct SplitSpec {
  double train = 0.7;
  double validation = 0.15;
  double test = 0.15;
  std::uint64_t seed = 0;

  /// "0.7,0.15,0.15".
  static SplitSpec parse(const std::string& text, std::uint64_t seed = 0);
  void validate() const;
};

struct SplitResult {
  Dataset train;
  Dataset validation;
  Dataset test;
  std::vector<std::int64_t> train_rows;
  std::vector<std::int64_t> validation_rows;
  std::vector<std::int64_t> test_rows;
};

/// Sizes: floor(M * f) for validation and test, the rest to train. Rows are
/// put in sorted order before the seeded shuffle, so the split of a given
/// multiset of rows does not depend on the file order.
SplitResult split(const Dataset& ds, const SplitSpec& spec);

/// `count` log-spaced values over [lo, hi] * |L y|_inf of the prepared fit.
std::vector<double> default_lambda_grid(const FitProblem& problem, int count = 20, double lo = 1e-4, double hi = 1e2);

struct LambdaResult {
  double lambda = 0.0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
  double htv = 0.0;
  double objective = 0.0;
  std::int64_t iterations = 0;
  Termination termination = Termination::kTolerance;
  SolverKind solver = SolverKind::kFistaDual;
};

struct GridSearchOptions {
  FitOptions fit;
  /// Solve the grid in ascending order, starting each FISTA solve from the
  /// previous dual. Forces sequential execution.
  bool warm_start = false;
  /// 0 means hardware concurrency.
  int threads = 0;
  /// Recorded in the report only.
  std::uint64_t seed = 0;
};

struct GridSearchResult {
  double best_lambda = 0.0;
  std::size_t best_index = 0;
  /// In the order of the input lambdas.
  std::vector<LambdaResult> table;
  std::vector<CpwlModel> models;
  std::uint64_t seed = 0;
};

/// Fits one model per lambda on `train` and scores it on `validation`.
/// Lowest validation MSE wins; near ties (within 1e-12 of the validation
/// target scale) go to the smaller lambda.
GridSearchResult grid_search_lambda(const Dataset& train, const Dataset& validation, const std::vector<double>& lambdas,
                                    const SolveConfig& cfg, const GridSearchOptions& options = {});

/// Same, on an already prepared problem.
GridSearchResult grid_search_lambda(const FitProblem& problem, const Dataset& train, const Dataset& validation,
                                    const std::vector<double>& lambdas, const SolveConfig& cfg,
                                    const GridSearchOptions& options = {});

void write_grid_report(std::ostream& out, const GridSearchResult& result);

}  // namespace dhtv
