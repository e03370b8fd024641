#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dhtv/errors.hpp"
#include "dhtv/geometry.hpp"

namespace dhtv {
namespace {

// Fully corrective Frank-Wolfe (Wolfe's minimum-norm-point method) on
// conv(points - x). The linear oracle is the vertex argmin as in plain
// Frank-Wolfe; each new vertex is followed by an exact minimization over the
// affine hull of the active set, so the iteration is finite in exact
// arithmetic and does not crawl along thin hull facets.
struct FrankWolfeResult {
  Eigen::VectorXd point;
  std::vector<double> weights;
  double gap = 0.0;
  bool converged = false;
};

// Weights summing to one that minimize |P a| over the affine hull of P's columns.
Eigen::VectorXd affine_min_norm(const Eigen::MatrixXd& p) {
  const Eigen::Index k = p.cols();
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
  kkt.topLeftCorner(k, k) = p.transpose() * p;
  kkt.topRightCorner(k, 1).setOnes();
  kkt.bottomLeftCorner(1, k).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
  rhs[k] = 1.0;
  return kkt.completeOrthogonalDecomposition().solve(rhs).head(k);
}

FrankWolfeResult frank_wolfe(const Eigen::MatrixXd& points, const Eigen::VectorXd& x,
                             const ProjectionOptions& options) {
  const Eigen::MatrixXd p = points.colwise() - x;
  const Eigen::Index n = p.cols();
  const double scale = std::max(1.0, p.colwise().squaredNorm().maxCoeff());
  FrankWolfeResult r;
  r.weights.assign(static_cast<std::size_t>(n), 0.0);

  Eigen::Index start = 0;
  p.colwise().squaredNorm().minCoeff(&start);
  std::vector<Eigen::Index> active{start};
  Eigen::VectorXd w = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd cur = p.col(start);

  auto gather = [&] {
    Eigen::MatrixXd sub(p.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t i = 0; i < active.size(); ++i) sub.col(static_cast<Eigen::Index>(i)) = p.col(active[i]);
    return sub;
  };

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const Eigen::VectorXd scores = p.transpose() * cur;
    Eigen::Index fw = 0;
    scores.minCoeff(&fw);
    r.gap = cur.squaredNorm() - scores[fw];
    // A small gap only bounds the squared distance error by the gap, so keep
    // going until no vertex improves; the method stops finitely on the
    // optimal face. gap_tolerance decides whether the end state is accepted.
    if (r.gap <= 1e-15 * scale || std::find(active.begin(), active.end(), fw) != active.end()) {
      r.converged = r.gap <= options.gap_tolerance * scale;
      break;
    }
    active.push_back(fw);
    w.conservativeResize(w.size() + 1);
    w[w.size() - 1] = 0.0;

    // Minor cycles: move toward the affine minimizer until it is interior.
    for (; it < options.max_iterations; ++it) {
      const Eigen::VectorXd alpha = affine_min_norm(gather());
      if ((alpha.array() > 1e-12).all()) {
        w = alpha;
        break;
      }
      double theta = 1.0;
      for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (alpha[i] <= 1e-12 && w[i] - alpha[i] > 0.0) theta = std::min(theta, w[i] / (w[i] - alpha[i]));
      }
      w = (1.0 - theta) * w + theta * alpha;
      std::vector<Eigen::Index> kept;
      std::vector<double> kept_w;
      for (std::size_t i = 0; i < active.size(); ++i) {
        if (w[static_cast<Eigen::Index>(i)] > 1e-12) {
          kept.push_back(active[i]);
          kept_w.push_back(w[static_cast<Eigen::Index>(i)]);
        }
      }
      active.swap(kept);
      w = Eigen::Map<const Eigen::VectorXd>(kept_w.data(), static_cast<Eigen::Index>(kept_w.size()));
      w /= w.sum();
    }
    cur = gather() * w;
  }
  for (std::size_t i = 0; i < active.size(); ++i) r.weights[active[i]] = w[static_cast<Eigen::Index>(i)];
  r.point = x + cur;
  return r;
}

}  // namespace

Eigen::VectorXd Triangulation::project_to_hull(const Eigen::Ref<const Eigen::VectorXd>& x,
                                               const ProjectionOptions& options) const {
  if (x.size() != dim_) fail(ErrorCode::kDimensionMismatch, "project_to_hull: dimension mismatch");
  if (!x.allFinite()) fail(ErrorCode::kInvalidArgument, "project_to_hull: non-finite point");
  if (locate(x).inside()) return x;

  Eigen::MatrixXd hull(dim_, static_cast<Eigen::Index>(hull_vertices_.size()));
  for (std::size_t i = 0; i < hull_vertices_.size(); ++i) {
    hull.col(static_cast<Eigen::Index>(i)) = vertices_.col(hull_vertices_[i]);
  }
  const Eigen::VectorXd xv = x;
  FrankWolfeResult fw = frank_wolfe(hull, xv, options);
  if (!fw.converged) {
    fail(ErrorCode::kConvergenceFailure,
         "hull projection: duality gap " + std::to_string(fw.gap) + " after " +
             std::to_string(options.max_iterations) + " iterations");
  }

  // Polish: project onto the affine span of the support and keep it when it
  // is still inside the hull and optimal.
  std::vector<Eigen::Index> support;
  for (std::size_t i = 0; i < fw.weights.size(); ++i) {
    if (fw.weights[i] > 0.0) support.push_back(static_cast<Eigen::Index>(i));
  }
  if (support.size() >= 2) {
    const Eigen::VectorXd base = hull.col(support.front());
    Eigen::MatrixXd span(dim_, static_cast<Eigen::Index>(support.size() - 1));
    for (std::size_t i = 1; i < support.size(); ++i) {
      span.col(static_cast<Eigen::Index>(i - 1)) = hull.col(support[i]) - base;
    }
    const Eigen::VectorXd mu = span.completeOrthogonalDecomposition().solve(xv - base);
    const Eigen::VectorXd polished = base + span * mu;
    const Eigen::VectorXd grad = polished - xv;
    const double gap = grad.dot(polished) - (hull.transpose() * grad).minCoeff();
    const double scale = std::max(1.0, grad.norm() * diagonal_);
    if (polished.allFinite() && gap <= 1e-12 * scale && locate(polished).inside() &&
        grad.squaredNorm() <= (fw.point - xv).squaredNorm() + 1e-14 * scale) {
      return polished;
    }
  }
  return fw.point;
}

}  // namespace dhtv
