#pragma once

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dhtv/geometry.hpp"

namespace dhtv::testing {

// Gradient of the affine interpolant of c over simplex s, by solving the
// (d+1)-point system [tau^T 1] [a; b] = c directly.
inline Eigen::VectorXd interpolant_affine(const Triangulation& t, SimplexId s, const Eigen::VectorXd& c) {
  const int d = t.dimension();
  const auto verts = t.simplex(s);
  Eigen::MatrixXd m(d + 1, d + 1);
  Eigen::VectorXd rhs(d + 1);
  for (int i = 0; i <= d; ++i) {
    m.row(i) << t.vertex(verts[i]).transpose(), 1.0;
    rhs[i] = c[verts[i]];
  }
  return m.fullPivLu().solve(rhs);
}

inline Eigen::VectorXd interpolant_gradient(const Triangulation& t, SimplexId s, const Eigen::VectorXd& c) {
  return interpolant_affine(t, s, c).head(t.dimension());
}

inline double interpolant_value(const Triangulation& t, SimplexId s, const Eigen::VectorXd& c,
                                const Eigen::VectorXd& x) {
  const Eigen::VectorXd ab = interpolant_affine(t, s, c);
  return ab.head(t.dimension()).dot(x) + ab[t.dimension()];
}

inline std::vector<VertexId> shared_of(const Triangulation& t, NeighborPair p) {
  const auto a = t.simplex(p.first);
  const auto b = t.simplex(p.second);
  std::vector<VertexId> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// (k-1)-volume of k points via the Gram determinant of their edge vectors.
inline double gram_volume(const Triangulation& t, const std::vector<VertexId>& ids) {
  const int k = static_cast<int>(ids.size());
  if (k == 1) return 1.0;
  Eigen::MatrixXd e(t.dimension(), k - 1);
  for (int i = 1; i < k; ++i) e.col(i - 1) = t.vertex(ids[i]) - t.vertex(ids[0]);
  double fact = 1.0;
  for (int i = 2; i < k; ++i) fact *= i;
  return std::sqrt(std::max(0.0, (e.transpose() * e).determinant())) / fact;
}

// Direct sum over neighbour pairs of |a_k - a_n| Vol(facet).
inline double direct_htv(const Triangulation& t, const Eigen::VectorXd& c) {
  double total = 0.0;
  for (const auto& p : t.neighbor_pairs()) {
    const Eigen::VectorXd jump = interpolant_gradient(t, p.first, c) - interpolant_gradient(t, p.second, c);
    total += jump.norm() * gram_volume(t, shared_of(t, p));
  }
  return total;
}

inline double dense_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& h, const Eigen::MatrixXd& l,
                              double lambda, const Eigen::VectorXd& c) {
  return 0.5 * (y - h * c).squaredNorm() + lambda * (l * c).lpNorm<1>();
}

// Exhaustive reference: for every sign pattern s of Lc solve
//   min 1/2 |y - Hc|^2 + lambda s^T L c  s.t.  (Lc)_r = 0 where s_r = 0,
// then keep the candidate with the smallest true objective. Exact when
// H^T H is positive definite.
inline Eigen::VectorXd brute_force(const Eigen::VectorXd& y, const Eigen::MatrixXd& h, const Eigen::MatrixXd& l,
                                   double lambda) {
  const int n = static_cast<int>(h.cols());
  const int rows = static_cast<int>(l.rows());
  Eigen::VectorXd best_c;
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> s(rows, -1);
  while (true) {
    std::vector<int> zero_rows;
    Eigen::VectorXd lin = h.transpose() * y;
    for (int r = 0; r < rows; ++r) {
      if (s[r] == 0) zero_rows.push_back(r);
      else lin -= lambda * s[r] * l.row(r).transpose();
    }
    const int z = static_cast<int>(zero_rows.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + z, n + z);
    kkt.topLeftCorner(n, n) = h.transpose() * h;
    for (int i = 0; i < z; ++i) {
      kkt.block(n + i, 0, 1, n) = l.row(zero_rows[i]);
      kkt.block(0, n + i, n, 1) = l.row(zero_rows[i]).transpose();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + z);
    rhs.head(n) = lin;
    const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    const Eigen::VectorXd c = sol.head(n);
    const double f = dense_objective(y, h, l, lambda, c);
    if (f < best) {
      best = f;
      best_c = c;
    }
    int r = 0;
    while (r < rows && s[r] == 1) s[r++] = -1;
    if (r == rows) break;
    ++s[r];
  }
  return best_c;
}

}  // namespace dhtv::testing
