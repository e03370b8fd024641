#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "dhtv/errors.hpp"
#include "dhtv/geometry.hpp"

namespace dhtv {
namespace {

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

Triangulation::Triangulation(Eigen::MatrixXd vertices, std::vector<VertexId> simplices)
    : dim_(static_cast<int>(vertices.rows())), vertices_(std::move(vertices)) {
  if (dim_ < 1) fail(ErrorCode::kDegenerateInput, "triangulation dimension must be >= 1");
  if (!vertices_.allFinite()) fail(ErrorCode::kDegenerateInput, "vertex coordinates must be finite");
  const int k = dim_ + 1;
  if (simplices.size() % static_cast<std::size_t>(k) != 0) {
    fail(ErrorCode::kDimensionMismatch, "simplex array length is not a multiple of d+1");
  }
  num_simplices_ = static_cast<std::int64_t>(simplices.size()) / k;
  const auto n_vertices = vertices_.cols();

  for (std::int64_t s = 0; s < num_simplices_; ++s) {
    auto first = simplices.begin() + s * k;
    std::sort(first, first + k);
    for (int i = 0; i < k; ++i) {
      if (first[i] < 0 || first[i] >= n_vertices) {
        fail(ErrorCode::kDimensionMismatch, "simplex vertex id out of range");
      }
      if (i > 0 && first[i] == first[i - 1]) {
        fail(ErrorCode::kDegenerateInput, "simplex with repeated vertex");
      }
    }
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(num_simplices_));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    return std::lexicographical_compare(simplices.begin() + a * k, simplices.begin() + (a + 1) * k,
                                        simplices.begin() + b * k, simplices.begin() + (b + 1) * k);
  });
  simplices_.resize(simplices.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy_n(simplices.begin() + order[i] * k, k, simplices_.begin() + i * k);
  }

  // Facet matching: each facet record is (simplex, opposite slot); sorting by
  // the facet's vertex tuple brings shared facets next to each other.
  const std::int64_t n_facets = num_simplices_ * k;
  auto facet_less = [&](std::int64_t a, std::int64_t b) {
    const auto sa = a / k, ia = a % k, sb = b / k, ib = b % k;
    int ja = 0, jb = 0;
    for (int step = 0; step < dim_; ++step) {
      if (ja == ia) ++ja;
      if (jb == ib) ++jb;
      const VertexId va = simplices_[sa * k + ja], vb = simplices_[sb * k + jb];
      if (va != vb) return va < vb;
      ++ja;
      ++jb;
    }
    return a < b;
  };
  auto facet_equal = [&](std::int64_t a, std::int64_t b) {
    const auto sa = a / k, ia = a % k, sb = b / k, ib = b % k;
    int ja = 0, jb = 0;
    for (int step = 0; step < dim_; ++step) {
      if (ja == ia) ++ja;
      if (jb == ib) ++jb;
      if (simplices_[sa * k + ja] != simplices_[sb * k + jb]) return false;
      ++ja;
      ++jb;
    }
    return true;
  };
  std::vector<std::int64_t> facets(static_cast<std::size_t>(n_facets));
  std::iota(facets.begin(), facets.end(), 0);
  std::sort(facets.begin(), facets.end(), facet_less);

  neighbors_.assign(static_cast<std::size_t>(n_facets), kNoSimplex);
  std::vector<char> on_hull(static_cast<std::size_t>(n_vertices), 0);
  for (std::int64_t i = 0; i < n_facets;) {
    std::int64_t j = i + 1;
    while (j < n_facets && facet_equal(facets[i], facets[j])) ++j;
    if (j - i > 2) fail(ErrorCode::kDegenerateInput, "facet shared by more than two simplices");
    if (j - i == 2) {
      const auto a = facets[i], b = facets[i + 1];
      neighbors_[a] = static_cast<SimplexId>(b / k);
      neighbors_[b] = static_cast<SimplexId>(a / k);
      pairs_.push_back({static_cast<SimplexId>(std::min(a / k, b / k)),
                        static_cast<SimplexId>(std::max(a / k, b / k))});
    } else {
      const auto s = facets[i] / k, opp = facets[i] % k;
      for (int v = 0; v < k; ++v) {
        if (v != opp) on_hull[simplices_[s * k + v]] = 1;
      }
    }
    i = j;
  }
  std::sort(pairs_.begin(), pairs_.end());
  for (VertexId v = 0; v < n_vertices; ++v) {
    if (on_hull[v]) hull_vertices_.push_back(v);
  }

  vertex_simplex_.assign(static_cast<std::size_t>(n_vertices), kNoSimplex);
  for (std::int64_t s = num_simplices_ - 1; s >= 0; --s) {
    for (int i = 0; i < k; ++i) vertex_simplex_[simplices_[s * k + i]] = static_cast<SimplexId>(s);
  }

  inverse_edges_.resize(static_cast<std::size_t>(num_simplices_ * dim_ * dim_));
  Eigen::MatrixXd edges(dim_, dim_);
  for (std::int64_t s = 0; s < num_simplices_; ++s) {
    const auto v0 = vertices_.col(simplices_[s * k]);
    for (int i = 1; i < k; ++i) edges.col(i - 1) = vertices_.col(simplices_[s * k + i]) - v0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(edges);
    if (lu.determinant() == 0.0 || lu.rcond() < 1e-15) {
      fail(ErrorCode::kDegenerateInput, "simplex " + std::to_string(s) + " is degenerate");
    }
    const Eigen::MatrixXd inv = lu.inverse();
    for (int r = 0; r < dim_; ++r) {
      for (int c = 0; c < dim_; ++c) inverse_edges_[(s * dim_ + r) * dim_ + c] = inv(r, c);
    }
  }

  if (n_vertices > 0) {
    diagonal_ = (vertices_.rowwise().maxCoeff() - vertices_.rowwise().minCoeff()).norm();
  }
}

Eigen::VectorXd Triangulation::barycentric(SimplexId s, const Eigen::Ref<const Eigen::VectorXd>& x) const {
  const int k = dim_ + 1;
  const auto v0 = vertices_.col(simplices_[static_cast<std::size_t>(s) * k]);
  Eigen::VectorXd w(k);
  const double* inv = inverse_edges_.data() + static_cast<std::size_t>(s) * dim_ * dim_;
  double sum = 0.0;
  for (int r = 0; r < dim_; ++r) {
    double acc = 0.0;
    for (int c = 0; c < dim_; ++c) acc += inv[r * dim_ + c] * (x[c] - v0[c]);
    w[r + 1] = acc;
    sum += acc;
  }
  w[0] = 1.0 - sum;
  return w;
}

SimplexId Triangulation::nearest_vertex_simplex(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  VertexId best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (VertexId v = 0; v < vertices_.cols(); ++v) {
    if (vertex_simplex_[v] == kNoSimplex) continue;
    const double d = (vertices_.col(v) - x).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = v;
    }
  }
  return best < 0 ? kNoSimplex : vertex_simplex_[best];
}

SimplexId Triangulation::walk(const Eigen::Ref<const Eigen::VectorXd>& x, SimplexId start,
                              bool* outside) const {
  *outside = false;
  const int k = dim_ + 1;
  const std::int64_t limit = 4 * num_simplices_ + 64;
  SimplexId s = start;
  for (std::int64_t step = 0; step < limit && s != kNoSimplex; ++step) {
    const Eigen::VectorXd w = barycentric(s, x);
    int worst = 0;
    for (int i = 1; i < k; ++i) {
      if (w[i] < w[worst]) worst = i;
    }
    if (w[worst] >= -kLocateTolerance) return s;
    const auto nb = neighbors(s);
    for (int i = 0; i < k; ++i) {
      // x is beyond a supporting hyperplane of the hull.
      if (w[i] < -kLocateTolerance && nb[i] == kNoSimplex) {
        *outside = true;
        return kNoSimplex;
      }
    }
    s = nb[worst];
  }
  // Walk did not settle; fall back to a scan.
  for (SimplexId t = 0; t < num_simplices_; ++t) {
    if (barycentric(t, x).minCoeff() >= -kLocateTolerance) return t;
  }
  *outside = true;
  return kNoSimplex;
}

BarycentricLocation Triangulation::locate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  BarycentricLocation loc;
  if (x.size() != dim_) fail(ErrorCode::kDimensionMismatch, "locate: point dimension mismatch");
  if (num_simplices_ == 0 || !x.allFinite()) return loc;
  bool outside = false;
  SimplexId s = walk(x, nearest_vertex_simplex(x), &outside);
  if (s == kNoSimplex) return loc;

  const int k = dim_ + 1;
  Eigen::VectorXd w = barycentric(s, x);
  if (w.minCoeff() <= kLocateTolerance) {
    // x sits on a shared face: pick the smallest containing simplex id.
    std::vector<SimplexId> stack{s};
    std::vector<SimplexId> seen{s};
    SimplexId best = s;
    while (!stack.empty()) {
      const SimplexId cur = stack.back();
      stack.pop_back();
      const Eigen::VectorXd wc = barycentric(cur, x);
      const auto nb = neighbors(cur);
      for (int i = 0; i < k; ++i) {
        if (wc[i] > kLocateTolerance || nb[i] == kNoSimplex) continue;
        if (std::find(seen.begin(), seen.end(), nb[i]) != seen.end()) continue;
        seen.push_back(nb[i]);
        if (barycentric(nb[i], x).minCoeff() >= -kLocateTolerance) {
          stack.push_back(nb[i]);
          best = std::min(best, nb[i]);
        }
      }
    }
    s = best;
    w = barycentric(s, x);
  }
  const auto verts = simplex(s);
  for (int i = 0; i < k; ++i) {
    if (vertices_.col(verts[i]) == x) {
      w.setZero();
      w[i] = 1.0;
      break;
    }
  }
  loc.simplex = s;
  loc.weights = std::move(w);
  return loc;
}

Eigen::MatrixXd Triangulation::simplex_gradient_matrix(SimplexId s, VertexId apex) const {
  if (s < 0 || s >= num_simplices_) fail(ErrorCode::kInvalidArgument, "simplex id out of range");
  const auto verts = simplex(s);
  if (std::find(verts.begin(), verts.end(), apex) == verts.end()) {
    fail(ErrorCode::kInvalidArgument, "apex is not a vertex of the simplex");
  }
  Eigen::MatrixXd rows(dim_, dim_);
  int r = 0;
  for (VertexId v : verts) {
    if (v == apex) continue;
    rows.row(r++) = (vertices_.col(apex) - vertices_.col(v)).transpose();
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(rows);
  const Eigen::MatrixXd inv = lu.inverse();
  const double cond = rows.cwiseAbs().colwise().sum().maxCoeff() *
                      inv.cwiseAbs().colwise().sum().maxCoeff();
  if (!std::isfinite(cond) || cond > 1e12) {
    fail(ErrorCode::kIllConditioned,
         "simplex " + std::to_string(s) + " edge matrix condition " + std::to_string(cond));
  }
  return inv;
}

double Triangulation::simplex_volume(SimplexId s) const {
  const auto verts = simplex(s);
  Eigen::MatrixXd edges(dim_, dim_);
  for (int i = 1; i <= dim_; ++i) edges.col(i - 1) = vertices_.col(verts[i]) - vertices_.col(verts[0]);
  return std::abs(edges.determinant()) / factorial(dim_);
}

}  // namespace dhtv
