#pragma once

#include <vector>

#include <Eigen/Core>

#include "dhtv/geometry.hpp"
#include "dhtv/sparse.hpp"

namespace dhtv {

/// Gradient jump a_A - a_B across a facet as a linear map of the d+2 vertex
/// values involved: gradient_jump = block * c[columns].
struct GradientDifference {
  /// apex_A, the d shared vertices in ascending id, apex_B.
  std::vector<VertexId> columns;
  /// d x (d+2): [G_A 1 | G_B - G_A | -G_B 1].
  Eigen::MatrixXd block;

  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& c) const;
};

/// Everything the regularization row of one neighbour pair is built from.
/// Simplex A is the pair member with the smaller id.
struct NeighborPairGeometry {
  NeighborPair pair;
  std::vector<VertexId> shared_vertices;
  VertexId apex_a = -1;
  VertexId apex_b = -1;
  Eigen::VectorXd unit_normal;
  double intersection_volume = 0.0;
  GradientDifference gradient_difference;
  /// Vol * u^T * block, aligned with gradient_difference.columns.
  Eigen::RowVectorXd regularization_row;
};

/// Row m holds the barycentric weights of column m of `points` at the
/// vertices of its containing simplex, so H * c evaluates the CPWL function.
SparseMatrix build_forward(const Triangulation& t, const Eigen::Ref<const Eigen::MatrixXd>& points);

GradientDifference gradient_difference(const Triangulation& t, NeighborPair pair);

/// Unit normal of the shared facet, from the first column of the inverse of
/// [[tau_apexA 1]; [tau_shared 1] ...].
Eigen::VectorXd facet_normal(const Triangulation& t, NeighborPair pair);

/// (d-1)-volume of the shared facet via the Cayley-Menger determinant.
double facet_volume(const Triangulation& t, NeighborPair pair);

/// (k-1)-volume of the simplex spanned by the k columns of `points`, from the
/// Cayley-Menger determinant. Vol^2 within -1e-12 of zero is clamped to 0.
double cayley_menger_volume(const Eigen::Ref<const Eigen::MatrixXd>& points);

NeighborPairGeometry pair_geometry(const Triangulation& t, NeighborPair pair);

/// One row per neighbour pair (in neighbor_pairs() order):
/// R_AB = Vol_AB * u_AB^T * G_AB, so that HTV = |L c|_1.
SparseMatrix build_regularization(const Triangulation& t);

/// |L c|_1
double htv(const SparseMatrix& regularization, const Eigen::Ref<const Eigen::VectorXd>& c);

}  // namespace dhtv
