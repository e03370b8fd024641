#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "dhtv/errors.hpp"
#include "dhtv/model.hpp"
#include "dhtv/operators.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

namespace dhtv {
namespace {

using testing::random_points;

SolveConfig tight(double lambda) {
  SolveConfig cfg;
  cfg.lambda = lambda;
  cfg.tol = 1e-14;
  cfg.max_iters = 400000;
  return cfg;
}

Dataset make_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  Dataset ds;
  ds.features = x;
  ds.targets = y;
  for (Eigen::Index j = 0; j < x.cols(); ++j) ds.feature_names.push_back("x" + std::to_string(j));
  ds.target_name = "y";
  return ds;
}

// Rows are samples.
Eigen::MatrixXd random_rows(int n, int d, std::uint64_t seed, double scale = 1.0) {
  return random_points(d, n, seed, scale).transpose();
}

template <typename F>
void expect_code(ErrorCode code, F&& f) {
  try {
    f();
    ADD_FAILURE() << "expected " << error_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

using testing::interpolant_value;

TEST(Standardization, PopulationStatistics) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 10, 2, 20, 3, 30, 4, 40;
  const Standardization s = Standardization::fit(x);
  EXPECT_DOUBLE_EQ(s.mean[0], 2.5);
  EXPECT_DOUBLE_EQ(s.mean[1], 25.0);
  EXPECT_DOUBLE_EQ(s.scale[0], std::sqrt(1.25));
  EXPECT_DOUBLE_EQ(s.scale[1], std::sqrt(125.0));
  const Eigen::MatrixXd z = s.apply(x);
  ASSERT_EQ(z.rows(), 2);
  ASSERT_EQ(z.cols(), 4);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(z.row(j).mean(), 0.0, 1e-15);
    EXPECT_NEAR(z.row(j).squaredNorm() / 4.0, 1.0, 1e-14);
  }
  EXPECT_TRUE(s.apply_point(x.row(2).transpose()).isApprox(z.col(2), 1e-15));
}

TEST(Standardization, ConstantFeatureIsDegenerate) {
  Eigen::MatrixXd x(3, 2);
  x << 1, 5, 2, 5, 3, 5;
  expect_code(ErrorCode::kDegenerateInput, [&] { Standardization::fit(x); });
}

TEST(Standardization, WrongWidth) {
  Eigen::MatrixXd x = random_rows(5, 2, 1);
  const Standardization s = Standardization::fit(x);
  expect_code(ErrorCode::kDimensionMismatch, [&] { s.apply(Eigen::MatrixXd::Zero(3, 3)); });
}

TEST(Deduplicate, MergesRoundedDuplicatesWithMeanTarget) {
  Eigen::MatrixXd z(2, 5);
  z << 0.0, 1.0, 0.0 + 1e-15, 0.5, 1.0,
       0.0, 0.0, 0.0, 0.5, 0.0;
  Eigen::VectorXd y(5);
  y << 1.0, 2.0, 3.0, 4.0, 6.0;
  const DedupResult r = deduplicate(z, y);
  ASSERT_EQ(r.points.cols(), 3);
  // Lexicographic order of groups.
  EXPECT_EQ(r.points.col(0), Eigen::Vector2d(0.0, 0.0));
  EXPECT_EQ(r.points.col(1), Eigen::Vector2d(0.5, 0.5));
  EXPECT_EQ(r.points.col(2), Eigen::Vector2d(1.0, 0.0));
  EXPECT_DOUBLE_EQ(r.targets[0], 2.0);
  EXPECT_DOUBLE_EQ(r.targets[1], 4.0);
  EXPECT_DOUBLE_EQ(r.targets[2], 4.0);
  EXPECT_EQ(r.group, (std::vector<std::int64_t>{0, 2, 0, 1, 2}));
}

TEST(Deduplicate, DistinctBeyondTwelveDecimals) {
  Eigen::MatrixXd z(1, 2);
  z << 0.0, 1e-10;
  const DedupResult r = deduplicate(z, Eigen::VectorXd::Ones(2));
  EXPECT_EQ(r.points.cols(), 2);
}

TEST(Deduplicate, RowOrderInvariant) {
  std::mt19937_64 rng(5);
  Eigen::MatrixXd z = random_points(3, 40, 9);
  z.col(7) = z.col(3);
  z.col(20) = z.col(3);
  z.col(30) = z.col(11);
  Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(40, -1.0, 2.0);
  const DedupResult a = deduplicate(z, y);
  std::vector<Eigen::Index> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd zp(3, 40);
  Eigen::VectorXd yp(40);
  for (int i = 0; i < 40; ++i) {
    zp.col(i) = z.col(perm[i]);
    yp[i] = y[perm[i]];
  }
  const DedupResult b = deduplicate(zp, yp);
  ASSERT_EQ(a.points.cols(), 37);
  EXPECT_EQ(a.points, b.points);
  EXPECT_TRUE(a.targets.isApprox(b.targets, 1e-15));
}

TEST(PrepareFit, InsufficientDistinctPoints) {
  Eigen::MatrixXd x(4, 2);
  x << 0, 0, 1, 1, 0, 0, 1, 1;
  expect_code(ErrorCode::kInsufficientData, [&] { prepare_fit(make_dataset(x, Eigen::VectorXd::Ones(4))); });
}

TEST(PrepareFit, EmptyDataset) {
  expect_code(ErrorCode::kInsufficientData,
              [&] { prepare_fit(make_dataset(Eigen::MatrixXd(0, 2), Eigen::VectorXd(0))); });
}

TEST(PrepareFit, DataPointsGridUsesIdentity) {
  const Eigen::MatrixXd x = random_rows(30, 2, 3);
  const FitProblem p = prepare_fit(make_dataset(x, Eigen::VectorXd::Zero(30)));
  EXPECT_TRUE(p.identity_forward());
  EXPECT_EQ(p.n_samples, 30);
  EXPECT_EQ(p.n_unique, 30);
  EXPECT_EQ(p.regularization.rows(), static_cast<std::int64_t>(p.triangulation->neighbor_pairs().size()));
}

TEST(Fit, AffineDataHasZeroHtvAndError) {
  for (int d : {1, 2, 3}) {
    const Eigen::MatrixXd x = random_rows(60, d, 10 + d, 3.0);
    Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(d, 0.5, -1.5);
    const Eigen::VectorXd y = (x * a).array() + 2.0;
    const CpwlModel m = fit(make_dataset(x, y), tight(0.3));
    EXPECT_NEAR(m.metadata().htv, 0.0, 1e-8) << "d=" << d;
    EXPECT_LT((m.predict(x) - y).squaredNorm() / 60.0, 1e-8) << "d=" << d;
    // Away from the samples but inside the hull.
    const Eigen::MatrixXd probe = random_rows(200, d, 99, 3.0);
    const Eigen::MatrixXd z = m.standardization().apply(probe);
    int inside = 0;
    for (int i = 0; i < 200; ++i) {
      if (!m.triangulation().locate(z.col(i)).inside()) continue;
      ++inside;
      EXPECT_NEAR(m.evaluate_in_hull(z.col(i)), probe.row(i).dot(a) + 2.0, 1e-6);
    }
    EXPECT_GT(inside, 50);
  }
}

TEST(Fit, ZeroLambdaInterpolatesDedupTargets) {
  Eigen::MatrixXd x = random_rows(50, 2, 17);
  x.row(10) = x.row(4);
  Eigen::VectorXd y = random_points(1, 50, 18).row(0).transpose();
  const CpwlModel m = fit(make_dataset(x, y), tight(0.0));
  EXPECT_EQ(m.metadata().n_unique, 49);
  EXPECT_NEAR(m.predict_one(Eigen::VectorXd(x.row(4).transpose())), 0.5 * (y[4] + y[10]), 1e-12);
  for (int i = 0; i < 50; ++i) {
    if (i == 4 || i == 10) continue;
    EXPECT_NEAR(m.predict_one(Eigen::VectorXd(x.row(i).transpose())), y[i], 1e-12);
  }
}

class FixedModel : public ::testing::Test {
 protected:
  void SetUp() override {
    const Eigen::MatrixXd v = random_points(2, 40, 21);
    tri = std::make_shared<const Triangulation>(delaunay(v));
    c = random_points(1, 40, 22).row(0).transpose();
    Standardization s;
    s.mean = Eigen::Vector2d(1.0, -2.0);
    s.scale = Eigen::Vector2d(2.0, 0.5);
    model = CpwlModel(tri, c, s, 0.1);
  }
  Eigen::VectorXd raw(const Eigen::VectorXd& z) const {
    return model.standardization().mean + (z.array() * model.standardization().scale.array()).matrix();
  }
  std::shared_ptr<const Triangulation> tri;
  Eigen::VectorXd c;
  CpwlModel model;
};

TEST_F(FixedModel, EvaluateAtVerticesAndCentroids) {
  for (VertexId v = 0; v < tri->num_vertices(); ++v) {
    EXPECT_NEAR(model.evaluate_in_hull(tri->vertex(v)), c[v], 1e-12);
  }
  for (SimplexId s = 0; s < tri->num_simplices(); ++s) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(2);
    double mean = 0.0;
    for (VertexId v : tri->simplex(s)) {
      centroid += tri->vertex(v) / 3.0;
      mean += c[v] / 3.0;
    }
    EXPECT_NEAR(model.evaluate_in_hull(centroid), mean, 1e-12);
  }
}

TEST_F(FixedModel, MatchesInterpolantOracle) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const SimplexId s = static_cast<SimplexId>(rng() % tri->num_simplices());
    Eigen::Vector3d w(u(rng), u(rng), u(rng));
    w /= w.sum();
    Eigen::VectorXd z = Eigen::VectorXd::Zero(2);
    for (int i = 0; i < 3; ++i) z += w[i] * tri->vertex(tri->simplex(s)[i]);
    const double expected = interpolant_value(*tri, s, c, z);
    EXPECT_NEAR(model.evaluate_in_hull(z), expected, 1e-12);
    EXPECT_NEAR(model.predict_one(raw(z)), expected, 1e-12);
  }
}

TEST_F(FixedModel, OutsideHullIsAnError) {
  expect_code(ErrorCode::kOutsideHull, [&] { model.evaluate_in_hull(Eigen::Vector2d(5.0, 5.0)); });
}

TEST_F(FixedModel, ContinuousAcrossFacets) {
  // Lipschitz bound from the largest simplex gradient.
  double lip = 0.0;
  for (SimplexId s = 0; s < tri->num_simplices(); ++s) {
    const auto verts = tri->simplex(s);
    const Eigen::MatrixXd g = tri->simplex_gradient_matrix(s, verts[0]);
    Eigen::VectorXd diff(2);
    for (int i = 0; i < 2; ++i) diff[i] = c[verts[0]] - c[verts[i + 1]];
    lip = std::max(lip, (g * diff).norm());
  }
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int k = 0; k < 2000; ++k) {
    const Eigen::Vector2d a(u(rng), u(rng));
    const Eigen::Vector2d step = Eigen::Vector2d(u(rng), u(rng)).normalized() * 1e-7;
    EXPECT_LE(std::abs(model.predict_standardized(a + step) - model.predict_standardized(a)), lip * 1e-7 + 1e-12);
  }
}

TEST(Predict, OutsideSquareUsesProjection) {
  Eigen::MatrixXd v(2, 5);
  v << 0, 1, 0, 1, 0.5,
       0, 0, 1, 1, 0.5;
  auto tri = std::make_shared<const Triangulation>(delaunay(v));
  Eigen::VectorXd c(5);
  for (int i = 0; i < 5; ++i) c[i] = 3.0 * v(0, i) - 2.0 * v(1, i) + 1.0;
  Standardization s;
  s.mean = Eigen::Vector2d::Zero();
  s.scale = Eigen::Vector2d::Ones();
  const CpwlModel m(tri, c, s, 0.0);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-4.0, 5.0);
  for (int k = 0; k < 500; ++k) {
    const Eigen::Vector2d x(u(rng), u(rng));
    const Eigen::Vector2d p = x.cwiseMax(0.0).cwiseMin(1.0);
    EXPECT_NEAR(m.predict_one(x), 3.0 * p[0] - 2.0 * p[1] + 1.0, 1e-6);
  }
  // Constant along the outward normal of an edge.
  for (double t : {0.0, 0.5, 2.0, 10.0}) {
    EXPECT_NEAR(m.predict_one(Eigen::Vector2d(1.0 + t, 0.3)), 3.0 - 0.6 + 1.0, 1e-6);
  }
}

TEST_F(FixedModel, EvaluationOperatorMatchesPredict) {
  const Eigen::MatrixXd probe = random_rows(300, 2, 31, 3.0);
  const SparseMatrix e = model.evaluation_operator(probe);
  EXPECT_EQ(e.rows(), 300);
  EXPECT_EQ(e.cols(), tri->num_vertices());
  const Eigen::VectorXd via_e = e.multiply(c);
  const Eigen::VectorXd direct = model.predict(probe);
  EXPECT_LT((via_e - direct).lpNorm<Eigen::Infinity>(), 1e-12);
  for (std::int64_t r = 0; r < e.rows(); ++r) {
    double sum = 0.0;
    for (double w : e.row_values(r)) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(Serialize, RoundTripIsBitExact) {
  const Eigen::MatrixXd x = random_rows(80, 3, 41, 2.0);
  const Eigen::VectorXd y = x.rowwise().norm();
  const CpwlModel m = fit(make_dataset(x, y), tight(0.05));
  const auto bytes = m.serialize();
  const CpwlModel back = CpwlModel::deserialize(bytes);
  EXPECT_EQ(back.coefficients(), m.coefficients());
  EXPECT_EQ(back.triangulation().vertices(), m.triangulation().vertices());
  EXPECT_EQ(back.triangulation().simplex_data(), m.triangulation().simplex_data());
  EXPECT_EQ(back.lambda(), m.lambda());
  EXPECT_EQ(back.metadata().iterations, m.metadata().iterations);
  EXPECT_EQ(back.metadata().htv, m.metadata().htv);
  EXPECT_EQ(back.metadata().feature_names, m.metadata().feature_names);
  EXPECT_EQ(back.metadata().target_name, "y");
  const Eigen::MatrixXd probe = random_rows(1000, 3, 42, 4.0);
  const Eigen::VectorXd a = m.predict(probe);
  const Eigen::VectorXd b = back.predict(probe);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a[i], b[i]);
  EXPECT_EQ(back.serialize(), bytes);
}

TEST(Serialize, CorruptionIsDetected) {
  const Eigen::MatrixXd x = random_rows(20, 2, 43);
  const CpwlModel m = fit(make_dataset(x, x.col(0).cwiseAbs()), tight(0.01));
  const auto bytes = m.serialize();

  for (std::size_t cut : {std::size_t{0}, std::size_t{7}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    std::vector<std::uint8_t> shortened(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    expect_code(ErrorCode::kCorruptPayload, [&] { CpwlModel::deserialize(shortened); });
  }
  auto version = bytes;
  version[8] = 2;
  expect_code(ErrorCode::kFormatVersionMismatch, [&] { CpwlModel::deserialize(version); });
  auto magic = bytes;
  magic[0] = 'X';
  expect_code(ErrorCode::kCorruptPayload, [&] { CpwlModel::deserialize(magic); });
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= 0x10;
  expect_code(ErrorCode::kCorruptPayload, [&] { CpwlModel::deserialize(flipped); });
  auto longer = bytes;
  longer.push_back(0);
  expect_code(ErrorCode::kCorruptPayload, [&] { CpwlModel::deserialize(longer); });
}

TEST(Serialize, SaveAndLoad) {
  const Eigen::MatrixXd x = random_rows(25, 2, 44);
  const CpwlModel m = fit(make_dataset(x, x.col(1)), tight(0.01));
  const auto path = std::filesystem::temp_directory_path() / "dhtv_model_roundtrip.bin";
  m.save(path);
  const CpwlModel back = CpwlModel::load(path);
  std::filesystem::remove(path);
  EXPECT_EQ(back.serialize(), m.serialize());
  expect_code(ErrorCode::kIoError, [&] { CpwlModel::load(path); });
}

TEST(Fit, ExplicitGridUsesAdmm) {
  // Regular grid covering the data; data are affine so the fit is exact.
  Eigen::MatrixXd grid(36, 2);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) grid.row(6 * i + j) << -1.2 + 0.48 * i, -1.2 + 0.48 * j;
  const Eigen::MatrixXd x = random_rows(100, 2, 45);
  const Eigen::VectorXd y = (2.0 * x.col(0) - x.col(1)).array() + 0.5;
  FitOptions opts;
  opts.grid = GridPolicy::kExplicit;
  opts.explicit_grid = grid;
  const FitProblem p = prepare_fit(make_dataset(x, y), opts);
  EXPECT_FALSE(p.identity_forward());
  EXPECT_EQ(p.forward.rows(), 100);
  EXPECT_EQ(p.forward.cols(), 36);
  SolveReport report;
  SolveConfig cfg = tight(1e-3);
  cfg.max_iters = 20000;
  const CpwlModel m = solve_fit(p, cfg, std::nullopt, &report);
  EXPECT_EQ(report.solver_used, SolverKind::kAdmm);
  EXPECT_EQ(m.metadata().solver, SolverKind::kAdmm);
  EXPECT_EQ(m.num_parameters(), 36);
  EXPECT_LT((m.predict(x) - y).lpNorm<Eigen::Infinity>(), 1e-4);
  EXPECT_LT(m.metadata().htv, 1e-4);
}

TEST(Fit, ExplicitGridMustCoverData) {
  Eigen::MatrixXd grid(4, 2);
  grid << 0, 0, 1, 0, 0, 1, 1, 1;
  Eigen::MatrixXd x(4, 2);
  x << 0.5, 0.5, 2.0, 2.0, 0.1, 0.2, 0.3, 0.9;
  FitOptions opts;
  opts.grid = GridPolicy::kExplicit;
  opts.explicit_grid = grid;
  expect_code(ErrorCode::kPointOutsideHull, [&] { prepare_fit(make_dataset(x, Eigen::VectorXd::Ones(4)), opts); });
}

TEST(Fit, WarmStartReachesSameSolution) {
  const Eigen::MatrixXd x = random_rows(120, 2, 46, 2.0);
  Eigen::VectorXd y(120);
  for (int i = 0; i < 120; ++i) y[i] = std::max(0.0, 1.0 - x.row(i).cwiseAbs().maxCoeff()) + 0.05 * std::sin(17.0 * i);
  const FitProblem p = prepare_fit(make_dataset(x, y));
  SolveReport first;
  solve_fit(p, tight(0.01), std::nullopt, &first);
  SolveReport cold;
  SolveReport warm;
  const CpwlModel a = solve_fit(p, tight(0.02), std::nullopt, &cold);
  const CpwlModel b = solve_fit(p, tight(0.02), first.u_hat, &warm);
  EXPECT_NEAR(a.metadata().objective, b.metadata().objective, 1e-9 * a.metadata().objective);
  EXPECT_LT((a.coefficients() - b.coefficients()).lpNorm<Eigen::Infinity>(), 1e-5);
}

TEST(Fit, DimensionLimit) {
  const Eigen::MatrixXd x = random_rows(20, 3, 47);
  FitOptions opts;
  opts.delaunay.max_dimension = 2;
  expect_code(ErrorCode::kDimensionTooHigh, [&] { prepare_fit(make_dataset(x, Eigen::VectorXd::Ones(20)), opts); });
}

}  // namespace
}  // namespace dhtv
