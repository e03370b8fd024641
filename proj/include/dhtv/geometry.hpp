#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace dhtv {

using VertexId = std::int32_t;
using SimplexId = std::int32_t;

inline constexpr SimplexId kNoSimplex = -1;

/// Unordered pair of simplices sharing a facet, stored with first < second.
struct NeighborPair {
  SimplexId first = kNoSimplex;
  SimplexId second = kNoSimplex;

  friend auto operator<=>(const NeighborPair&, const NeighborPair&) = default;
};

struct BarycentricLocation {
  std::optional<SimplexId> simplex;
  /// One weight per vertex of `simplex`, in the simplex's vertex order.
  Eigen::VectorXd weights;

  bool inside() const { return simplex.has_value(); }
};

struct DelaunayOptions {
  int max_dimension = 9;
  /// A simplex whose Hadamard ratio |det E| / prod |e_i| (edge matrix E from
  /// its first vertex) is below this counts as degenerate.
  double degeneracy_tolerance = 1e-12;
  /// Joggle retries after a degenerate simplex is produced (magnitudes
  /// 1e-10, 1e-8, 1e-6 of the bounding-box diagonal).
  int joggle_attempts = 3;
};

struct ProjectionOptions {
  /// Largest accepted final Frank-Wolfe gap, relative to max(1, largest
  /// squared distance from the query to a hull vertex). Iteration itself
  /// continues until no hull vertex improves the current point.
  double gap_tolerance = 1e-8;
  int max_iterations = 10000;
};

/// Immutable simplicial complex over a vertex set. Simplices are stored with
/// ascending vertex ids and sorted lexicographically, so simplex ids are a
/// pure function of the vertex-index tuples.
class Triangulation {
 public:
  static constexpr double kLocateTolerance = 1e-9;

  Triangulation() = default;
  /// `vertices` is d x N (one point per column); `simplices` holds (d+1) ids
  /// per simplex. Builds adjacency and per-simplex barycentric maps.
  Triangulation(Eigen::MatrixXd vertices, std::vector<VertexId> simplices);

  int dimension() const { return dim_; }
  std::int64_t num_vertices() const { return vertices_.cols(); }
  std::int64_t num_simplices() const { return num_simplices_; }

  const Eigen::MatrixXd& vertices() const { return vertices_; }
  Eigen::MatrixXd::ConstColXpr vertex(VertexId v) const { return vertices_.col(v); }

  std::span<const VertexId> simplex(SimplexId s) const {
    return {simplices_.data() + static_cast<std::size_t>(s) * (dim_ + 1),
            static_cast<std::size_t>(dim_ + 1)};
  }
  const std::vector<VertexId>& simplex_data() const { return simplices_; }

  /// neighbors(s)[i] is the simplex across the facet opposite simplex(s)[i],
  /// or kNoSimplex when that facet lies on the hull.
  std::span<const SimplexId> neighbors(SimplexId s) const {
    return {neighbors_.data() + static_cast<std::size_t>(s) * (dim_ + 1),
            static_cast<std::size_t>(dim_ + 1)};
  }

  /// Lexicographically sorted by (first, second).
  const std::vector<NeighborPair>& neighbor_pairs() const { return pairs_; }

  /// Vertex ids lying on at least one hull facet (ascending).
  const std::vector<VertexId>& hull_vertices() const { return hull_vertices_; }

  double bounding_diagonal() const { return diagonal_; }

  /// Barycentric weights of x with respect to simplex s (may be negative).
  Eigen::VectorXd barycentric(SimplexId s, const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Containing simplex, or none when x is outside the hull. Points on shared
  /// faces resolve to the smallest containing simplex id.
  BarycentricLocation locate(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Euclidean projection of x onto the convex hull of the vertices.
  Eigen::VectorXd project_to_hull(const Eigen::Ref<const Eigen::VectorXd>& x,
                                  const ProjectionOptions& options = {}) const;

  /// Inverse of the d x d matrix whose rows are (tau_apex - tau_j)^T over the
  /// other vertices of s, taken in ascending vertex id.
  Eigen::MatrixXd simplex_gradient_matrix(SimplexId s, VertexId apex) const;

  double simplex_volume(SimplexId s) const;

 private:
  SimplexId walk(const Eigen::Ref<const Eigen::VectorXd>& x, SimplexId start, bool* outside) const;
  SimplexId nearest_vertex_simplex(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  int dim_ = 0;
  std::int64_t num_simplices_ = 0;
  Eigen::MatrixXd vertices_;
  std::vector<VertexId> simplices_;
  std::vector<SimplexId> neighbors_;
  std::vector<NeighborPair> pairs_;
  std::vector<VertexId> hull_vertices_;
  std::vector<SimplexId> vertex_simplex_;
  // Row-major d x d inverse edge matrices, one per simplex.
  std::vector<double> inverse_edges_;
  double diagonal_ = 0.0;
};

/// Delaunay triangulation of the columns of `points` (d x N). Cospherical
/// ties are broken by symbolic perturbation in input-index order, so the
/// result is deterministic.
Triangulation delaunay(const Eigen::Ref<const Eigen::MatrixXd>& points,
                       const DelaunayOptions& options = {});

}  // namespace dhtv
