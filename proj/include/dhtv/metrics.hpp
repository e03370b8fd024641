#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "dhtv/dataset.hpp"
#include "dhtv/geometry.hpp"
#include "dhtv/model.hpp"
#include "dhtv/sparse.hpp"

namespace dhtv {

double mse(const Eigen::Ref<const Eigen::VectorXd>& predictions, const Eigen::Ref<const Eigen::VectorXd>& targets);

/// Batch regressor on standardized d x M columns.
using Regressor = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

Regressor as_regressor(const CpwlModel& model);

/// d x n standard normal draws (Box-Muller on mt19937_64).
Eigen::MatrixXd standard_normal_points(int d, int n, std::uint64_t seed);

/// A regressor sampled on a grid and re-triangulated there.
struct GridSample {
  Triangulation triangulation;
  SparseMatrix regularization;
  Eigen::VectorXd values;
  double htv = 0.0;
};

GridSample sample_on_grid(const Regressor& f, const Eigen::Ref<const Eigen::MatrixXd>& grid);
GridSample sample_on_random_grid(const Regressor& f, int d, int n_grid, std::uint64_t seed);

/// |L_R c_R|_1 on a Delaunay triangulation of n_grid standard normal points.
double random_triangulation_htv(const Regressor& f, int d, int n_grid = 1000, std::uint64_t seed = 0);

/// Percentage of rows of L with |(L c)_r| <= epsilon.
double sparsity_metric(const SparseMatrix& l, const Eigen::Ref<const Eigen::VectorXd>& c, double epsilon = 0.1);

struct MetricReport {
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double train_mse = 0.0;
  double validation_mse = 0.0;
  double test_mse = 0.0;
  double htv_raw = 0.0;
  /// htv_raw / normalizer; NaN until normalize() is called.
  double htv_normalized = 0.0;
  double sparsity_percent = 0.0;
  std::int64_t n_parameters = 0;
};

/// MSEs of empty sets are NaN. The random grid uses `grid_seed`.
MetricReport evaluate_model(const CpwlModel& model, const Dataset& train, const Dataset& validation,
                            const Dataset& test, std::uint64_t grid_seed, int n_grid = 1000, double epsilon = 0.1);

/// Divides every htv_raw by `normalizer` (the mean random-grid HTV of the
/// interpolating fits).
void normalize(std::vector<MetricReport>& runs, double normalizer);

/// One row per run and a final "mean" row.
void write_metric_reports(std::ostream& out, const std::vector<MetricReport>& runs);
MetricReport mean_report(const std::vector<MetricReport>& runs);

}  // namespace dhtv
