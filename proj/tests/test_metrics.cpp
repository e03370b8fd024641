#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "dhtv/errors.hpp"
#include "dhtv/metrics.hpp"
#include "dhtv/operators.hpp"
#include "test_support.hpp"

namespace dhtv {
namespace {

using testing::random_points;

TEST(Mse, Examples) {
  EXPECT_EQ(mse(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d(1, 2, 3)), 0.0);
  EXPECT_EQ(mse(Eigen::Vector2d(1, -1), Eigen::Vector2d(0, 0)), 1.0);
  const Eigen::VectorXd y = random_points(1, 50, 1).row(0).transpose();
  const double var = (y.array() - y.mean()).square().mean();
  EXPECT_NEAR(mse(Eigen::VectorXd::Constant(50, y.mean()), y), var, 1e-15);
  try {
    mse(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(StandardNormal, MomentsAndDeterminism) {
  const Eigen::MatrixXd p = standard_normal_points(3, 100001, 12);
  EXPECT_EQ(p, standard_normal_points(3, 100001, 12));
  for (int j = 0; j < 3; ++j) {
    const Eigen::VectorXd r = p.row(j).transpose();
    EXPECT_NEAR(r.mean(), 0.0, 0.01);
    EXPECT_NEAR((r.array() - r.mean()).square().mean(), 1.0, 0.01);
    EXPECT_NEAR(r.array().pow(4).mean(), 3.0, 0.06);
  }
  EXPECT_TRUE(p.allFinite());
}

Regressor affine(Eigen::VectorXd a, double b) {
  return [a, b](const Eigen::MatrixXd& z) -> Eigen::VectorXd { return (z.transpose() * a).array() + b; };
}

TEST(RandomHtv, AffineRegressorIsZero) {
  for (int d : {2, 3}) {
    const double h = random_triangulation_htv(affine(Eigen::VectorXd::LinSpaced(d, -2.0, 3.0), 1.5), d, 1000, 3);
    EXPECT_LT(h, 1e-8) << d;
  }
}

TEST(RandomHtv, Deterministic) {
  const Regressor f = [](const Eigen::MatrixXd& z) -> Eigen::VectorXd {
    return z.colwise().norm().transpose();
  };
  EXPECT_EQ(random_triangulation_htv(f, 2, 300, 5), random_triangulation_htv(f, 2, 300, 5));
  EXPECT_NE(random_triangulation_htv(f, 2, 300, 5), random_triangulation_htv(f, 2, 300, 6));
}

TEST(RandomHtv, NeedsEnoughPoints) {
  try {
    random_triangulation_htv(affine(Eigen::Vector2d(1, 1), 0), 2, 2, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
  }
}

Dataset pyramid_data(int n, std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  std::normal_distribution<double> g(0.0, noise);
  Dataset ds;
  ds.features.resize(n, 2);
  ds.targets.resize(n);
  for (int i = 0; i < n; ++i) {
    const double x = u(rng), y = u(rng);
    ds.features.row(i) << x, y;
    ds.targets[i] = std::max(0.0, 1.0 - std::max(std::abs(x), std::abs(y))) + g(rng);
  }
  return ds;
}

SolveConfig at(double lambda) {
  SolveConfig cfg;
  cfg.lambda = lambda;
  cfg.tol = 1e-12;
  cfg.max_iters = 400000;
  return cfg;
}

TEST(RandomHtv, ModelOnItsOwnVerticesMatchesHtv) {
  const CpwlModel m = fit(pyramid_data(150, 2, 0.05), at(0.01));
  const GridSample g = sample_on_grid(as_regressor(m), m.triangulation().vertices());
  EXPECT_EQ(g.triangulation.simplex_data(), m.triangulation().simplex_data());
  EXPECT_NEAR(g.htv, m.metadata().htv, 1e-10 * m.metadata().htv);
}

TEST(RandomHtv, InterpolantNormalizesToOne) {
  const Dataset ds = pyramid_data(120, 3, 0.05);
  const CpwlModel interp = fit(ds, at(0.0));
  std::vector<MetricReport> runs = {evaluate_model(interp, ds, ds.subset({}), ds.subset({}), 11, 400)};
  EXPECT_TRUE(std::isnan(runs[0].validation_mse));
  EXPECT_LT(runs[0].train_mse, 1e-24);
  normalize(runs, runs[0].htv_raw);
  EXPECT_DOUBLE_EQ(runs[0].htv_normalized, 1.0);
}

TEST(Sparsity, Examples) {
  const Triangulation t = delaunay(random_points(2, 40, 4));
  const SparseMatrix l = build_regularization(t);
  Eigen::VectorXd c(40);
  for (int i = 0; i < 40; ++i) c[i] = 3.0 * t.vertex(i)[0] - t.vertex(i)[1] + 2.0;
  EXPECT_EQ(sparsity_metric(l, c), 100.0);
  EXPECT_EQ(sparsity_metric(l, random_points(1, 40, 5).row(0).transpose(), std::numeric_limits<double>::infinity()),
            100.0);
  // Every row of a random field scaled far past epsilon is active.
  Eigen::VectorXd wild = 1e8 * random_points(1, 40, 6).row(0).transpose();
  const Eigen::VectorXd r = l.multiply(wild);
  ASSERT_GT(r.cwiseAbs().minCoeff(), 0.1);
  EXPECT_EQ(sparsity_metric(l, wild), 0.0);
  // Partial count against a direct tally.
  const Eigen::VectorXd mild = random_points(1, 40, 7).row(0).transpose();
  const Eigen::VectorXd rm = l.multiply(mild);
  const double expected = 100.0 * static_cast<double>((rm.array().abs() <= 0.05).count()) / static_cast<double>(l.rows());
  EXPECT_EQ(sparsity_metric(l, mild, 0.05), expected);
}

TEST(Sparsity, EmptyOperator) {
  try {
    sparsity_metric(SparseMatrix::from_triplets(0, 3, {}), Eigen::Vector3d::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyOperator);
  }
}

TEST(Sparsity, GrowsWithLambda) {
  const Dataset ds = pyramid_data(300, 8, 0.1);
  const FitProblem p = prepare_fit(ds);
  std::vector<double> sparsity;
  for (double l : {0.0, 0.001, 0.01, 0.05, 0.2, 1.0}) {
    const CpwlModel m = solve_fit(p, at(l));
    const GridSample g = sample_on_random_grid(as_regressor(m), 2, 1000, 21);
    sparsity.push_back(sparsity_metric(g.regularization, g.values));
  }
  int inversions = 0;
  for (std::size_t i = 1; i < sparsity.size(); ++i) inversions += sparsity[i] < sparsity[i - 1];
  EXPECT_LE(inversions, 1);
  EXPECT_GT(sparsity.back(), sparsity.front());
}

TEST(Report, CsvRowsAndMean) {
  std::vector<MetricReport> runs(2);
  runs[0].seed = 1;
  runs[0].test_mse = 2.0;
  runs[0].htv_raw = 4.0;
  runs[0].n_parameters = 10;
  runs[1].seed = 2;
  runs[1].test_mse = 4.0;
  runs[1].htv_raw = 8.0;
  runs[1].n_parameters = 13;
  normalize(runs, 4.0);
  const MetricReport m = mean_report(runs);
  EXPECT_EQ(m.test_mse, 3.0);
  EXPECT_EQ(m.htv_normalized, 1.5);
  EXPECT_EQ(m.n_parameters, 12);
  std::ostringstream out;
  write_metric_reports(out, runs);
  const std::string s = out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 4);
  EXPECT_NE(s.find("\nmean,,"), std::string::npos);
}

}  // namespace
}  // namespace dhtv
