#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "dhtv/errors.hpp"
#include "dhtv/geometry.hpp"
#include "test_support.hpp"

namespace dhtv {
namespace {

using testing::points2;
using testing::random_points;

using MatrixXl = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
using VectorXl = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

// Brute-force empty circumsphere check in extended precision. Returns the
// number of (vertex, simplex) pairs with the vertex strictly inside.
int count_empty_sphere_violations(const Triangulation& t, long double rel_tol = 1e-9L) {
  const int d = t.dimension();
  int violations = 0;
  for (SimplexId s = 0; s < t.num_simplices(); ++s) {
    const auto verts = t.simplex(s);
    MatrixXl a(d, d);
    VectorXl b(d);
    const Eigen::VectorXd p0 = t.vertex(verts[0]);
    for (int i = 1; i <= d; ++i) {
      const Eigen::VectorXd pi = t.vertex(verts[i]);
      for (int j = 0; j < d; ++j) a(i - 1, j) = 2.0L * (static_cast<long double>(pi[j]) - p0[j]);
      b[i - 1] = static_cast<long double>(pi.squaredNorm()) - static_cast<long double>(p0.squaredNorm());
    }
    const VectorXl center = a.fullPivLu().solve(b);
    long double r2 = 0;
    for (int j = 0; j < d; ++j) r2 += (p0[j] - center[j]) * (p0[j] - center[j]);
    for (VertexId v = 0; v < t.num_vertices(); ++v) {
      if (std::find(verts.begin(), verts.end(), v) != verts.end()) continue;
      long double q2 = 0;
      for (int j = 0; j < d; ++j) {
        const long double diff = t.vertex(v)[j] - center[j];
        q2 += diff * diff;
      }
      if (q2 < r2 * (1.0L - rel_tol)) ++violations;
    }
  }
  return violations;
}

void expect_valid_adjacency(const Triangulation& t) {
  const int k = t.dimension() + 1;
  std::map<std::vector<VertexId>, int> facet_count;
  for (SimplexId s = 0; s < t.num_simplices(); ++s) {
    const auto verts = t.simplex(s);
    const auto nb = t.neighbors(s);
    for (int i = 0; i < k; ++i) {
      std::vector<VertexId> facet;
      for (int j = 0; j < k; ++j) {
        if (j != i) facet.push_back(verts[j]);
      }
      ++facet_count[facet];
      if (nb[i] == kNoSimplex) continue;
      const auto back = t.neighbors(nb[i]);
      EXPECT_NE(std::find(back.begin(), back.end(), s), back.end()) << "asymmetric neighbours";
      const auto other = t.simplex(nb[i]);
      int shared = 0;
      for (VertexId v : verts) shared += std::count(other.begin(), other.end(), v);
      EXPECT_EQ(shared, t.dimension());
    }
  }
  for (const auto& [facet, count] : facet_count) EXPECT_LE(count, 2);
  for (const auto& p : t.neighbor_pairs()) EXPECT_LT(p.first, p.second);
}

// Andrew's monotone chain area, independent of the triangulation.
double hull_area_2d(const Eigen::MatrixXd& p) {
  std::vector<std::pair<double, double>> pts;
  for (Eigen::Index i = 0; i < p.cols(); ++i) pts.emplace_back(p(0, i), p(1, i));
  std::sort(pts.begin(), pts.end());
  auto cross = [](auto o, auto a, auto b) {
    return (a.first - o.first) * (b.second - o.second) - (a.second - o.second) * (b.first - o.first);
  };
  std::vector<std::pair<double, double>> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
    h[k++] = pts[i - 1];
  }
  h.resize(k - 1);
  double area = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& a = h[i];
    const auto& b = h[(i + 1) % h.size()];
    area += a.first * b.second - b.first * a.second;
  }
  return std::abs(area) / 2;
}

double total_volume(const Triangulation& t) {
  double v = 0;
  for (SimplexId s = 0; s < t.num_simplices(); ++s) v += t.simplex_volume(s);
  return v;
}

TEST(Delaunay, ThreePointsGiveOneSimplex) {
  const auto t = delaunay(points2({{0, 0}, {1, 0}, {0.2, 0.9}}));
  EXPECT_EQ(t.num_simplices(), 1);
  EXPECT_TRUE(t.neighbor_pairs().empty());
}

TEST(Delaunay, InteriorPointSplitsTriangle) {
  const auto t = delaunay(points2({{0, 0}, {3, 0}, {0, 3}, {1, 1}}));
  ASSERT_EQ(t.num_simplices(), 3);
  for (SimplexId s = 0; s < 3; ++s) {
    const auto v = t.simplex(s);
    EXPECT_NE(std::find(v.begin(), v.end(), 3), v.end());
  }
  EXPECT_EQ(t.neighbor_pairs().size(), 3u);
  EXPECT_EQ(count_empty_sphere_violations(t), 0);
}

TEST(Delaunay, CocircularSquareIsDeterministic) {
  const auto pts = points2({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const auto t = delaunay(pts);
  EXPECT_EQ(t.num_simplices(), 2);
  EXPECT_EQ(t.neighbor_pairs().size(), 1u);
  for (int run = 0; run < 5; ++run) {
    const auto again = delaunay(pts);
    EXPECT_EQ(again.simplex_data(), t.simplex_data());
  }
}

TEST(Delaunay, RandomInstancesSatisfyInvariants) {
  for (int d = 1; d <= 4; ++d) {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
      const int n = 10 + static_cast<int>(seed) * 30;
      const auto pts = random_points(d, n, 100 * d + seed);
      const auto t = delaunay(pts);
      EXPECT_EQ(count_empty_sphere_violations(t), 0) << "d=" << d << " seed=" << seed;
      expect_valid_adjacency(t);
      // every vertex is used
      std::set<VertexId> used(t.simplex_data().begin(), t.simplex_data().end());
      EXPECT_EQ(static_cast<Eigen::Index>(used.size()), pts.cols());
      if (d == 2) EXPECT_NEAR(total_volume(t), hull_area_2d(pts), 1e-12);
      if (d == 1) EXPECT_NEAR(total_volume(t), pts.maxCoeff() - pts.minCoeff(), 1e-12);
    }
  }
}

TEST(Delaunay, LatticeTiesAreResolved) {
  // Heavily cospherical inputs exercise the symbolic perturbation.
  Eigen::MatrixXd grid2(2, 36);
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 6; ++j) grid2.col(i * 6 + j) << i, j;
  }
  const auto t2 = delaunay(grid2);
  EXPECT_EQ(t2.num_simplices(), 50);
  EXPECT_NEAR(total_volume(t2), 25.0, 1e-12);
  EXPECT_EQ(count_empty_sphere_violations(t2), 0);
  expect_valid_adjacency(t2);

  Eigen::MatrixXd grid3(3, 27);
  int c = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) grid3.col(c++) << i, j, k;
  const auto t3 = delaunay(grid3);
  EXPECT_NEAR(total_volume(t3), 8.0, 1e-12);
  EXPECT_EQ(count_empty_sphere_violations(t3), 0);
  expect_valid_adjacency(t3);
  EXPECT_EQ(delaunay(grid3).simplex_data(), t3.simplex_data());
}

TEST(Delaunay, CollinearHullPoints) {
  // Points on the hull boundary that are collinear with hull edges.
  const auto t = delaunay(points2({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {0, 1}, {3, 1}, {1.5, 2}}));
  EXPECT_NEAR(total_volume(t), hull_area_2d(points2({{0, 0}, {3, 0}, {0, 1}, {3, 1}, {1.5, 2}})), 1e-12);
  for (SimplexId s = 0; s < t.num_simplices(); ++s) EXPECT_GT(t.simplex_volume(s), 1e-6);
  EXPECT_EQ(count_empty_sphere_violations(t), 0);
}

TEST(Delaunay, Errors) {
  try {
    delaunay(points2({{0, 0}, {1, 1}, {2, 2}, {3, 3}}));
    FAIL() << "expected DegenerateInput";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateInput);
  }
  try {
    delaunay(random_points(10, 40, 1));
    FAIL() << "expected DimensionTooHigh";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionTooHigh);
  }
  try {
    delaunay(points2({{0, 0}, {1, 0}, {0, 1}, {1, 0}}));
    FAIL() << "expected DegenerateInput for duplicates";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateInput);
  }
  DelaunayOptions opts;
  opts.max_dimension = 3;
  EXPECT_THROW(delaunay(random_points(4, 20, 2), opts), Error);
}

TEST(Delaunay, NineDimensionsWorks) {
  const auto t = delaunay(random_points(9, 14, 5));
  EXPECT_GT(t.num_simplices(), 0);
  EXPECT_EQ(count_empty_sphere_violations(t), 0);
  expect_valid_adjacency(t);
}

TEST(Locate, CentroidVertexAndOutside) {
  const auto t = delaunay(random_points(3, 40, 7));
  for (SimplexId s = 0; s < t.num_simplices(); s += 7) {
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(3);
    for (VertexId v : t.simplex(s)) centroid += t.vertex(v);
    centroid /= 4.0;
    const auto loc = t.locate(centroid);
    ASSERT_TRUE(loc.inside());
    EXPECT_EQ(*loc.simplex, s);
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(loc.weights[i], 0.25, 1e-12);
  }
  for (VertexId v = 0; v < t.num_vertices(); ++v) {
    const auto loc = t.locate(t.vertex(v));
    ASSERT_TRUE(loc.inside());
    const auto verts = t.simplex(*loc.simplex);
    for (int i = 0; i < 4; ++i) EXPECT_EQ(loc.weights[i], verts[i] == v ? 1.0 : 0.0);
  }
  EXPECT_FALSE(t.locate(Eigen::Vector3d(5, 0, 0)).inside());
}

TEST(Locate, WeightsReconstructInteriorPoints) {
  const auto t = delaunay(random_points(2, 100, 9));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 500; ++trial) {
    // Random convex combination of three vertices lies in the hull.
    Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    double total = 0;
    std::vector<double> w(3);
    for (auto& wi : w) total += (wi = u(rng));
    for (int i = 0; i < 3; ++i) x += w[i] / total * t.vertex(static_cast<VertexId>(rng() % 100));
    const auto loc = t.locate(x);
    ASSERT_TRUE(loc.inside());
    EXPECT_GE(loc.weights.minCoeff(), -1e-9);
    EXPECT_NEAR(loc.weights.sum(), 1.0, 1e-12);
    Eigen::VectorXd rebuilt = Eigen::VectorXd::Zero(2);
    const auto verts = t.simplex(*loc.simplex);
    for (int i = 0; i < 3; ++i) rebuilt += loc.weights[i] * t.vertex(verts[i]);
    EXPECT_LE((rebuilt - x).norm(), 1e-10);
  }
}

TEST(Locate, SharedFacetPicksSmallestId) {
  const auto t = delaunay(points2({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  // Midpoint of the square is on the shared diagonal.
  const auto loc = t.locate(Eigen::Vector2d(0.5, 0.5));
  ASSERT_TRUE(loc.inside());
  EXPECT_EQ(*loc.simplex, 0);
}

// Dense grid search over the hull as an independent projection oracle.
Eigen::Vector2d grid_projection(const Triangulation& t, const Eigen::Vector2d& x, int n) {
  Eigen::Vector2d best(0, 0);
  double best_d = 1e300;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const Eigen::Vector2d p(double(i) / n, double(j) / n);
      if (!t.locate(p).inside()) continue;
      const double d = (p - x).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = p;
      }
    }
  }
  return best;
}

TEST(ProjectToHull, UnitSquareCases) {
  const auto t = delaunay(points2({{0, 0}, {1, 0}, {1, 1}, {0, 1}}));
  const Eigen::Vector2d a(2, 0.5), b(2, 2);
  const Eigen::VectorXd pa = t.project_to_hull(a);
  const Eigen::VectorXd pb = t.project_to_hull(b);
  EXPECT_LE((pa - grid_projection(t, a, 200)).norm(), 1e-2);
  EXPECT_LE((pb - grid_projection(t, b, 200)).norm(), 1e-2);
  EXPECT_LE((pa - Eigen::Vector2d(1, 0.5)).norm(), 1e-12);
  EXPECT_LE((pb - Eigen::Vector2d(1, 1)).norm(), 1e-12);
  const Eigen::Vector2d inside(0.3, 0.7);
  EXPECT_EQ(t.project_to_hull(inside), inside);
}

TEST(ProjectToHull, IdempotentAndOptimal) {
  for (int d = 2; d <= 4; ++d) {
    const auto t = delaunay(random_points(d, 60, 11 + d));
    std::mt19937_64 rng(d);
    std::normal_distribution<double> g(0, 3);
    for (int trial = 0; trial < 40; ++trial) {
      Eigen::VectorXd x(d);
      for (int j = 0; j < d; ++j) x[j] = g(rng);
      const Eigen::VectorXd p = t.project_to_hull(x);
      const Eigen::VectorXd pp = t.project_to_hull(p);
      EXPECT_LE((pp - p).norm(), 1e-9);
      // Variational inequality: (x - p) . (v - p) <= 0 for every vertex.
      for (VertexId v = 0; v < t.num_vertices(); ++v) {
        EXPECT_LE((x - p).dot(t.vertex(v) - p), 1e-8);
      }
    }
  }
}

// Closest point over every hull edge of a planar triangulation.
Eigen::Vector2d edge_projection(const Triangulation& t, const Eigen::Vector2d& x) {
  Eigen::Vector2d best;
  double best_d = std::numeric_limits<double>::infinity();
  for (SimplexId s = 0; s < t.num_simplices(); ++s) {
    for (int i = 0; i < 3; ++i) {
      if (t.neighbors(s)[i] != kNoSimplex) continue;
      const auto v = t.simplex(s);
      const Eigen::Vector2d a = t.vertex(v[(i + 1) % 3]), b = t.vertex(v[(i + 2) % 3]);
      const double u = std::clamp((x - a).dot(b - a) / (b - a).squaredNorm(), 0.0, 1.0);
      const Eigen::Vector2d q = a + u * (b - a);
      if ((q - x).norm() < best_d) {
        best_d = (q - x).norm();
        best = q;
      }
    }
  }
  return best;
}

TEST(ProjectToHull, ExactJustOutsideTheBoundary) {
  for (int k = 0; k < 5; ++k) {
    const auto t = delaunay(random_points(2, 50, 70 + k, 2.0));
    std::mt19937_64 rng(k);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    int outside = 0;
    while (outside < 200) {
      const Eigen::Vector2d far(u(rng), u(rng));
      if (t.locate(far).inside()) continue;
      const Eigen::Vector2d edge = edge_projection(t, far);
      const Eigen::Vector2d near = edge + 1e-6 * (far - edge).normalized();
      EXPECT_LE((t.project_to_hull(far) - edge).norm(), 1e-10);
      EXPECT_LE((t.project_to_hull(near) - edge).norm(), 1e-10);
      ++outside;
    }
  }
}

TEST(SimplexGradientMatrix, Examples) {
  const auto t = delaunay(points2({{0, 0}, {1, 0}, {0, 1}}));
  const Eigen::MatrixXd g = t.simplex_gradient_matrix(0, 0);
  EXPECT_TRUE(g.isApprox(-Eigen::Matrix2d::Identity(), 1e-15));

  const auto scaled = delaunay(points2({{0, 0}, {2, 0}, {0, 2}}));
  EXPECT_TRUE(scaled.simplex_gradient_matrix(0, 0).isApprox(g * 0.5, 1e-15));

  const auto r = delaunay(random_points(4, 5, 21));
  for (VertexId apex : r.simplex(0)) {
    const Eigen::MatrixXd inv = r.simplex_gradient_matrix(0, apex);
    Eigen::MatrixXd fwd(4, 4);
    int row = 0;
    for (VertexId v : r.simplex(0)) {
      if (v != apex) fwd.row(row++) = (r.vertex(apex) - r.vertex(v)).transpose();
    }
    EXPECT_LE((fwd * inv - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  }
  EXPECT_THROW(t.simplex_gradient_matrix(0, 7), Error);
}

TEST(SimplexGradientMatrix, IllConditionedSliver) {
  Eigen::MatrixXd v(2, 3);
  v << 0, 1, 0.5, 0, 0, 1e-13;
  const Triangulation t(v, {0, 1, 2});
  try {
    t.simplex_gradient_matrix(0, 0);
    FAIL() << "expected IllConditioned";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIllConditioned);
  }
}

}  // namespace
}  // namespace dhtv
