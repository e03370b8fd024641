#include "dhtv/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "dhtv/errors.hpp"
#include "dhtv/operators.hpp"

namespace dhtv {
namespace {

// Uniform on (0, 1), never 0.
double open_unit(std::mt19937_64& rng) { return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53; }

double mse_or_nan(const CpwlModel& model, const Dataset& ds) {
  if (ds.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  return mse(model.predict(ds.features), ds.targets);
}

}  // namespace

double mse(const Eigen::Ref<const Eigen::VectorXd>& predictions, const Eigen::Ref<const Eigen::VectorXd>& targets) {
  if (predictions.size() != targets.size() || targets.size() == 0) {
    fail(ErrorCode::kDimensionMismatch, "mse needs two vectors of equal nonzero length (" +
                                            std::to_string(predictions.size()) + " vs " +
                                            std::to_string(targets.size()) + ")");
  }
  return (predictions - targets).squaredNorm() / static_cast<double>(targets.size());
}

Regressor as_regressor(const CpwlModel& model) {
  return [&model](const Eigen::MatrixXd& z) {
    Eigen::VectorXd out(z.cols());
    for (Eigen::Index i = 0; i < z.cols(); ++i) out[i] = model.predict_standardized(z.col(i));
    return out;
  };
}

Eigen::MatrixXd standard_normal_points(int d, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd p(d, n);
  for (Eigen::Index i = 0; i < p.size(); i += 2) {
    const double r = std::sqrt(-2.0 * std::log(open_unit(rng)));
    const double theta = 2.0 * std::numbers::pi * open_unit(rng);
    p.data()[i] = r * std::cos(theta);
    if (i + 1 < p.size()) p.data()[i + 1] = r * std::sin(theta);
  }
  return p;
}

GridSample sample_on_grid(const Regressor& f, const Eigen::Ref<const Eigen::MatrixXd>& grid) {
  GridSample s;
  s.triangulation = delaunay(grid);
  s.values = f(s.triangulation.vertices());
  if (s.values.size() != s.triangulation.num_vertices()) {
    fail(ErrorCode::kDimensionMismatch, "regressor returned the wrong number of values");
  }
  s.regularization = build_regularization(s.triangulation);
  s.htv = s.regularization.rows() == 0 ? 0.0 : htv(s.regularization, s.values);
  return s;
}

GridSample sample_on_random_grid(const Regressor& f, int d, int n_grid, std::uint64_t seed) {
  if (d < 1 || n_grid < d + 1) {
    fail(ErrorCode::kInvalidArgument, "random grid needs at least d+1 points");
  }
  return sample_on_grid(f, standard_normal_points(d, n_grid, seed));
}

double random_triangulation_htv(const Regressor& f, int d, int n_grid, std::uint64_t seed) {
  return sample_on_random_grid(f, d, n_grid, seed).htv;
}

double sparsity_metric(const SparseMatrix& l, const Eigen::Ref<const Eigen::VectorXd>& c, double epsilon) {
  if (l.rows() == 0) fail(ErrorCode::kEmptyOperator, "sparsity of an operator with no rows");
  if (!(epsilon >= 0.0)) fail(ErrorCode::kInvalidArgument, "epsilon must be nonnegative");
  const Eigen::VectorXd r = l.multiply(c);
  const auto flat = (r.array().abs() <= epsilon).count();
  return 100.0 * static_cast<double>(flat) / static_cast<double>(l.rows());
}

MetricReport evaluate_model(const CpwlModel& model, const Dataset& train, const Dataset& validation,
                            const Dataset& test, std::uint64_t grid_seed, int n_grid, double epsilon) {
  MetricReport r;
  r.seed = grid_seed;
  r.lambda = model.lambda();
  r.train_mse = mse_or_nan(model, train);
  r.validation_mse = mse_or_nan(model, validation);
  r.test_mse = mse_or_nan(model, test);
  const GridSample g = sample_on_random_grid(as_regressor(model), model.dimension(), n_grid, grid_seed);
  r.htv_raw = g.htv;
  r.htv_normalized = std::numeric_limits<double>::quiet_NaN();
  r.sparsity_percent = sparsity_metric(g.regularization, g.values, epsilon);
  r.n_parameters = model.num_parameters();
  return r;
}

void normalize(std::vector<MetricReport>& runs, double normalizer) {
  if (!(normalizer > 0.0)) fail(ErrorCode::kInvalidArgument, "HTV normalizer must be positive");
  for (auto& r : runs) r.htv_normalized = r.htv_raw / normalizer;
}

MetricReport mean_report(const std::vector<MetricReport>& runs) {
  MetricReport m;
  if (runs.empty()) return m;
  const double n = static_cast<double>(runs.size());
  double params = 0.0;
  for (const auto& r : runs) {
    m.lambda += r.lambda / n;
    m.train_mse += r.train_mse / n;
    m.validation_mse += r.validation_mse / n;
    m.test_mse += r.test_mse / n;
    m.htv_raw += r.htv_raw / n;
    m.htv_normalized += r.htv_normalized / n;
    m.sparsity_percent += r.sparsity_percent / n;
    params += static_cast<double>(r.n_parameters) / n;
  }
  m.n_parameters = std::llround(params);
  return m;
}

void write_metric_reports(std::ostream& out, const std::vector<MetricReport>& runs) {
  out << "run,seed,lambda,train_mse,validation_mse,test_mse,htv_raw,htv_normalized,sparsity_percent,n_parameters\n";
  char buf[512];
  auto row = [&](const std::string& label, const std::string& seed, const MetricReport& r) {
    std::snprintf(buf, sizeof buf, "%s,%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%lld\n", label.c_str(),
                  seed.c_str(), r.lambda, r.train_mse, r.validation_mse, r.test_mse, r.htv_raw, r.htv_normalized,
                  r.sparsity_percent, static_cast<long long>(r.n_parameters));
    out << buf;
  };
  for (std::size_t i = 0; i < runs.size(); ++i) row(std::to_string(i), std::to_string(runs[i].seed), runs[i]);
  if (!runs.empty()) row("mean", "", mean_report(runs));
}

}  // namespace dhtv
