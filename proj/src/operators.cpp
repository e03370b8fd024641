#include "dhtv/operators.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "dhtv/errors.hpp"

namespace dhtv {
namespace {

constexpr double kMaxCondition = 1e12;

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

struct PairVertices {
  std::vector<VertexId> shared;
  VertexId apex_a = -1;
  VertexId apex_b = -1;
};

PairVertices split_pair(const Triangulation& t, NeighborPair pair) {
  const auto& pairs = t.neighbor_pairs();
  if (!std::binary_search(pairs.begin(), pairs.end(), pair)) {
    fail(ErrorCode::kInvalidArgument, "(" + std::to_string(pair.first) + ", " +
                                          std::to_string(pair.second) + ") is not a neighbour pair");
  }
  const auto a = t.simplex(pair.first);
  const auto b = t.simplex(pair.second);
  PairVertices pv;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(pv.shared));
  for (VertexId v : a) {
    if (!std::binary_search(pv.shared.begin(), pv.shared.end(), v)) pv.apex_a = v;
  }
  for (VertexId v : b) {
    if (!std::binary_search(pv.shared.begin(), pv.shared.end(), v)) pv.apex_b = v;
  }
  return pv;
}

Eigen::VectorXd normal_from(const Triangulation& t, const PairVertices& pv) {
  const int d = t.dimension();
  // The first d entries of the first column of the inverse are unchanged by
  // translating all points, so work relative to apex A for conditioning.
  const Eigen::VectorXd origin = t.vertex(pv.apex_a);
  Eigen::MatrixXd m(d + 1, d + 1);
  m.row(0) << Eigen::RowVectorXd::Zero(d), 1.0;
  for (int l = 0; l < d; ++l) {
    m.row(l + 1) << (t.vertex(pv.shared[l]) - origin).transpose(), 1.0;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  const Eigen::MatrixXd inv = lu.inverse();
  const double cond = m.cwiseAbs().colwise().sum().maxCoeff() * inv.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(cond) || cond > kMaxCondition) {
    fail(ErrorCode::kIllConditioned, "facet normal matrix is numerically singular");
  }
  const Eigen::VectorXd z = inv.col(0).head(d);
  return z / z.norm();
}

GradientDifference gradient_difference_from(const Triangulation& t, NeighborPair pair,
                                            const PairVertices& pv) {
  const int d = t.dimension();
  const Eigen::MatrixXd ga = t.simplex_gradient_matrix(pair.first, pv.apex_a);
  const Eigen::MatrixXd gb = t.simplex_gradient_matrix(pair.second, pv.apex_b);
  GradientDifference g;
  g.columns.reserve(static_cast<std::size_t>(d + 2));
  g.columns.push_back(pv.apex_a);
  g.columns.insert(g.columns.end(), pv.shared.begin(), pv.shared.end());
  g.columns.push_back(pv.apex_b);
  g.block.resize(d, d + 2);
  g.block.col(0) = ga.rowwise().sum();
  g.block.middleCols(1, d) = gb - ga;
  g.block.col(d + 1) = -gb.rowwise().sum();
  return g;
}

double facet_volume_from(const Triangulation& t, const PairVertices& pv) {
  Eigen::MatrixXd pts(t.dimension(), static_cast<Eigen::Index>(pv.shared.size()));
  for (std::size_t l = 0; l < pv.shared.size(); ++l) {
    pts.col(static_cast<Eigen::Index>(l)) = t.vertex(pv.shared[l]);
  }
  return cayley_menger_volume(pts);
}

}  // namespace

Eigen::VectorXd GradientDifference::apply(const Eigen::Ref<const Eigen::VectorXd>& c) const {
  Eigen::VectorXd local(static_cast<Eigen::Index>(columns.size()));
  for (std::size_t i = 0; i < columns.size(); ++i) local[static_cast<Eigen::Index>(i)] = c[columns[i]];
  return block * local;
}

SparseMatrix build_forward(const Triangulation& t, const Eigen::Ref<const Eigen::MatrixXd>& points) {
  if (points.rows() != t.dimension()) {
    fail(ErrorCode::kDimensionMismatch, "build_forward: point dimension mismatch");
  }
  std::vector<Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(points.cols() * (t.dimension() + 1)));
  for (Eigen::Index m = 0; m < points.cols(); ++m) {
    const auto loc = t.locate(points.col(m));
    if (!loc.inside()) {
      fail(ErrorCode::kPointOutsideHull, "data point " + std::to_string(m) + " lies outside the hull");
    }
    const auto verts = t.simplex(*loc.simplex);
    for (std::size_t i = 0; i < verts.size(); ++i) {
      const double w = loc.weights[static_cast<Eigen::Index>(i)];
      if (w != 0.0) triplets.push_back({m, verts[i], w});
    }
  }
  return SparseMatrix::from_triplets(points.cols(), t.num_vertices(), std::move(triplets));
}

GradientDifference gradient_difference(const Triangulation& t, NeighborPair pair) {
  return gradient_difference_from(t, pair, split_pair(t, pair));
}

Eigen::VectorXd facet_normal(const Triangulation& t, NeighborPair pair) {
  return normal_from(t, split_pair(t, pair));
}

double facet_volume(const Triangulation& t, NeighborPair pair) {
  return facet_volume_from(t, split_pair(t, pair));
}

double cayley_menger_volume(const Eigen::Ref<const Eigen::MatrixXd>& points) {
  const auto k = points.cols();
  if (k < 1) fail(ErrorCode::kInvalidArgument, "cayley_menger_volume: need at least one point");
  Eigen::MatrixXd cm = Eigen::MatrixXd::Zero(k + 1, k + 1);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      cm(i, j) = cm(j, i) = (points.col(i) - points.col(j)).squaredNorm();
    }
    cm(i, k) = cm(k, i) = 1.0;
  }
  // For k points spanning a (k-1)-simplex: gamma = (-1)^k / (((k-1)!)^2 2^(k-1)).
  const int n = static_cast<int>(k);
  const double gamma = ((n % 2 == 0) ? 1.0 : -1.0) / (factorial(n - 1) * factorial(n - 1) * std::ldexp(1.0, n - 1));
  const double vol2 = gamma * cm.partialPivLu().determinant();
  if (vol2 < 0.0) {
    if (vol2 < -1e-12) {
      fail(ErrorCode::kNegativeDiscriminant, "Cayley-Menger volume squared is " + std::to_string(vol2));
    }
    return 0.0;
  }
  return std::sqrt(vol2);
}

NeighborPairGeometry pair_geometry(const Triangulation& t, NeighborPair pair) {
  PairVertices pv = split_pair(t, pair);
  NeighborPairGeometry g;
  g.pair = pair;
  g.apex_a = pv.apex_a;
  g.apex_b = pv.apex_b;
  g.unit_normal = normal_from(t, pv);
  g.intersection_volume = facet_volume_from(t, pv);
  g.gradient_difference = gradient_difference_from(t, pair, pv);
  g.regularization_row = g.intersection_volume * (g.unit_normal.transpose() * g.gradient_difference.block);
  g.shared_vertices = std::move(pv.shared);
  return g;
}

SparseMatrix build_regularization(const Triangulation& t) {
  const auto& pairs = t.neighbor_pairs();
  const int width = t.dimension() + 2;
  std::vector<Triplet> triplets;
  triplets.reserve(pairs.size() * static_cast<std::size_t>(width));
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const NeighborPairGeometry g = pair_geometry(t, pairs[r]);
    for (int j = 0; j < width; ++j) {
      triplets.push_back({static_cast<std::int64_t>(r), g.gradient_difference.columns[j], g.regularization_row[j]});
    }
  }
  return SparseMatrix::from_triplets(static_cast<std::int64_t>(pairs.size()), t.num_vertices(),
                                     std::move(triplets));
}

double htv(const SparseMatrix& regularization, const Eigen::Ref<const Eigen::VectorXd>& c) {
  if (c.size() != regularization.cols()) {
    fail(ErrorCode::kDimensionMismatch, "htv: coefficient length " + std::to_string(c.size()) +
                                            " does not match operator width " +
                                            std::to_string(regularization.cols()));
  }
  return regularization.multiply(c).lpNorm<1>();
}

}  // namespace dhtv
